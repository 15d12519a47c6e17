// Command-line front end: compute tensors, run interface designs, render
// fields, verify boundary residuals, and rebuild the bundled result tables.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 design did not converge, 5 verification tolerance exceeded.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iforge/conformal.hpp"
#include "iforge/designer.hpp"
#include "iforge/faber.hpp"
#include "iforge/field.hpp"
#include "iforge/interface.hpp"
#include "iforge/tensors.hpp"

using namespace iforge;
using nlohmann::json;

namespace {

struct CommonOpts {
    int trunc = 100;
    int report_order = 4;
    std::uint64_t seed = 12345;
    double tol = 1e-6;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--trunc", c.trunc, "truncation order of all series and matrices")
        ->check(CLI::Range(1, 2000));
    cmd->add_option("--report-order", c.report_order, "leading block size reported")
        ->check(CLI::Range(1, 100));
    cmd->add_option("--seed", c.seed, "random seed for any stochastic step");
    cmd->add_option("--tol", c.tol, "tolerance for verification gates");
}

VectorXcd incident_alpha(const std::string& name, int n) {
    VectorXcd a = VectorXcd::Zero(n);
    if (name == "x1")
        a[0] = Complex(1.0, 0.0);
    else if (name == "x2")
        a[0] = Complex(0.0, -1.0);  // Re[-i z] = x2
    else
        throw ConfigError("unknown incident field '" + name + "' (use x1 or x2)");
    return a;
}

InterfaceFunction load_interface(const std::string& path, double gamma) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open interface file " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("interface file parse error: ") + e.what());
    }
    return InterfaceFunction::from_json(j, gamma);
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << j.dump(1, '\t') << '\n';
}

// bundled example shapes used by `reproduce`
ConformalMap bundled_shape(int table) {
    if (table == 1)
        return ConformalMap(1.0, {Complex(0, 0), Complex(0.25, 0), Complex(0.125, 0), Complex(0.1, 0)});
    return ConformalMap(1.0, {Complex(0, 0), Complex(0.1, 0), Complex(0.25, 0), Complex(-0.05, 0),
                              Complex(0.05, 0), Complex(-0.04, 0), Complex(0.02, 0)});
}

int cmd_compute(const std::string& shape_path, const std::string& p_path, double sc, double sm,
                const CommonOpts& c, const std::string& out_path) {
    ConformalMap map = ConformalMap::load(shape_path);
    InterfaceFunction ifn = load_interface(p_path, map.gamma());
    MaterialParams mat(sc, sm);
    FaberTable faber(map, c.trunc);
    SystemMatrices sys = assemble_system(make_map_operators(map, faber), ifn, mat);
    TensorSet t = compute_tensors(sys, faber, c.report_order);
    json j = t.to_json();
    j["gamma"] = map.gamma();
    j["sigma_c"] = sc;
    j["sigma_m"] = sm;
    j["report_order"] = c.report_order;
    write_json(j, out_path);
    std::printf("wrote %s  (|N1_11| = %.6g, |N2_11| = %.6g, cond B2 = %.3g)\n", out_path.c_str(),
                std::abs(t.n1(0, 0)), std::abs(t.n2(0, 0)), t.cond_b2);
    return 0;
}

int cmd_design(const std::string& design_path, const CommonOpts& c, const std::string& out_path) {
    std::ifstream in(design_path);
    if (!in) throw ConfigError("cannot open design spec " + design_path);
    json spec;
    try {
        in >> spec;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("design spec parse error: ") + e.what());
    }
    if (!spec.contains("shape")) throw ConfigError("design spec: missing \"shape\"");
    ConformalMap map = spec["shape"].is_string() ? ConformalMap::load(spec["shape"].get<std::string>())
                                                 : ConformalMap::from_json(spec["shape"]);
    MaterialParams mat(spec.value("sigma_c", 5.0), spec.value("sigma_m", 1.0));
    std::vector<int> active = spec.value("active", std::vector<int>{0});
    const int orders = spec.value("n_orders", 1);

    DesignProblem prob(map, mat, active, orders);
    prob.real_only = spec.value("real_only", true);
    prob.paper_residual_mode = spec.value("paper_residual_mode", false);
    prob.alpha_lr = spec.value("alpha_lr", 0.5);
    prob.fd_step = spec.value("fd_step", 1e-6);
    prob.max_iter = spec.value("max_iter", 50);
    prob.tol_step = spec.value("tol_step", 1e-15);
    prob.tol_residual = spec.value("tol_residual", 1e-10);
    prob.n_seeds = spec.value("n_seeds", 8);
    prob.seed = spec.value("seed", c.seed);
    prob.n_trunc = spec.value("trunc", c.trunc);

    DesignResult res = newton_solve(prob);
    for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    json j = res.to_json();
    j["sigma_c"] = mat.sigma_c;
    j["sigma_m"] = mat.sigma_m;
    j["active"] = active;
    j["n_orders"] = orders;
    j["seed"] = prob.seed;
    j["trunc"] = prob.n_trunc;
    write_json(j, out_path);
    std::printf("wrote %s  (converged = %s, residual = %.3g, %zu distinct solutions)\n",
                out_path.c_str(), res.converged ? "yes" : "no", res.final_residual,
                res.distinct_solutions.size());
    if (!res.converged) return 4;
    return 0;
}

int cmd_render(const std::string& shape_path, const std::string& p_path, double sc, double sm,
               const std::string& grid_spec, int levels, const std::string& incident,
               const std::string& mode, const CommonOpts& c, const std::string& prefix) {
    ConformalMap map = ConformalMap::load(shape_path);
    InterfaceFunction ifn = load_interface(p_path, map.gamma());
    MaterialParams mat(sc, sm);

    GridBounds bounds{};
    int nx = 0, ny = 0;
    {
        std::stringstream ss(grid_spec);
        char comma;
        if (!(ss >> bounds.x0 >> comma >> bounds.x1 >> comma >> bounds.y0 >> comma >> bounds.y1 >>
              comma >> nx >> comma >> ny))
            throw ConfigError("bad --grid, expected x0,x1,y0,y1,nx,ny");
    }
    if (nx < 2 || ny < 2) throw ConfigError("grid resolution must be at least 2x2");

    FaberTable faber(map, c.trunc);
    MapOperators ops = make_map_operators(map, faber);
    const VectorXcd alpha = incident_alpha(incident, c.trunc);
    SolutionCoefficients sol;
    if (mode == "series") {
        SystemMatrices sys = assemble_system(ops, ifn, mat);
        sol = solve_coefficients(sys, faber, mat, alpha);
    } else if (mode == "bvp") {
        sol = solve_coefficients_bvp(map, faber, ifn, mat, alpha);
    } else {
        throw ConfigError("unknown --solution-mode '" + mode + "' (use series or bvp)");
    }

    FieldGrid grid = sample_grid(sol, map, faber, bounds, nx, ny);
    ContourSet cs = extract_contours(grid, even_levels(grid, levels));
    write_grid_csv(grid, prefix + ".csv");
    write_grid_json(grid, prefix + ".json");
    write_contours_svg(cs, bounds, map, prefix + ".svg");
    std::printf("wrote %s.csv %s.json %s.svg  (%d levels)\n", prefix.c_str(), prefix.c_str(),
                prefix.c_str(), static_cast<int>(cs.levels.size()));
    return 0;
}

int cmd_verify(const std::string& shape_path, const std::string& p_path, double sc, double sm,
               int collocation, const std::string& incident, const std::string& mode,
               const CommonOpts& c) {
    ConformalMap map = ConformalMap::load(shape_path);
    InterfaceFunction ifn = load_interface(p_path, map.gamma());
    MaterialParams mat(sc, sm);
    FaberTable faber(map, c.trunc);
    MapOperators ops = make_map_operators(map, faber);
    const VectorXcd alpha = incident_alpha(incident, c.trunc);

    SystemMatrices sys = assemble_system(ops, ifn, mat);
    SolutionCoefficients sol_series = solve_coefficients(sys, faber, mat, alpha);
    SolutionCoefficients sol_bvp = solve_coefficients_bvp(map, faber, ifn, mat, alpha);
    ResidualReport rs = boundary_residual(sol_series, map, faber, ifn, mat, collocation);
    ResidualReport rb = boundary_residual(sol_bvp, map, faber, ifn, mat, collocation);

    std::printf("collocation points: %d\n", collocation);
    std::printf("series solution : flux %.6e  jump %.6e\n", rs.max_flux_residual, rs.max_jump_residual);
    std::printf("bvp solution    : flux %.6e  jump %.6e  (interior constant %.6e)\n",
                rb.max_flux_residual, rb.max_jump_residual, sol_bvp.interior_const.sum());

    const ResidualReport& gate = mode == "series" ? rs : rb;
    if (std::max(gate.max_flux_residual, gate.max_jump_residual) > c.tol) {
        std::printf("FAIL: %s-mode residual exceeds tol %.3g\n", mode.c_str(), c.tol);
        return 5;
    }
    std::printf("OK: %s-mode residual within tol %.3g\n", mode.c_str(), c.tol);
    return 0;
}

int cmd_reproduce(int table, const CommonOpts& c, int n_seeds) {
    ConformalMap map = bundled_shape(table);
    const double sc = table == 1 ? 5.0 : 100.0;
    MaterialParams mat(sc, 1.0);
    FaberTable faber(map, c.trunc);
    MapOperators ops = make_map_operators(map, faber);

    auto gpt_row = [&](const InterfaceFunction& ifn) {
        SystemMatrices sys = assemble_system(ops, ifn, mat);
        return compute_tensors(sys, faber, 2);
    };
    auto print_row = [](const char* name, const TensorSet& t, const char* note) {
        std::printf("%-34s  % .6e  % .6e  % .6e  % .6e%s\n", name, t.n1(0, 0).real(),
                    t.n1(0, 1).real(), t.n2(0, 0).real(), t.n2(0, 1).real(), note);
    };

    std::printf("table %d  (sigma_c = %g, sigma_m = 1, gamma = 1, trunc = %d)\n", table, sc, c.trunc);
    std::printf("%-34s  %-14s  %-14s  %-14s  %-14s\n", "row", "N1_11", "N1_12", "N2_11", "N2_12");

    // p -> infinity emulated with a large constant coefficient; informational
    print_row("perfectly bonding (p0=1e8 emul.)",
              gpt_row(InterfaceFunction::constant(map.gamma(), 1e8)),
              "   [emulation, not a reproduction gate]");

    auto run_design = [&](std::vector<int> active, int orders) {
        DesignProblem prob(map, mat, std::move(active), orders);
        prob.n_seeds = n_seeds;
        prob.seed = c.seed;
        prob.n_trunc = c.trunc;
        DesignResult res = newton_solve(prob);
        for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        if (!res.converged) throw NumericalError("reproduce: design did not converge");
        std::printf("  (designed p:");
        for (const auto& pk : res.p_coeffs) std::printf(" %.4f%+.4fi", pk.real(), pk.imag());
        std::printf(")\n");
        return gpt_row(InterfaceFunction(map.gamma(), res.p_coeffs));
    };

    print_row("1st order vanishing (designed)", run_design({0, 2}, 1), "");
    print_row("2nd order vanishing (designed)", run_design({0, 1, 2, 3}, 2), "");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polarization tensors and neutral-inclusion interface design"};
    app.require_subcommand(1);

    CommonOpts copts;

    // compute
    auto* compute = app.add_subcommand("compute", "compute FPT/GPT matrices for a configuration");
    std::string shape_path, p_path, out_path = "tensors.json";
    double sigma_c = 5.0, sigma_m = 1.0;
    compute->add_option("--shape", shape_path, "shape JSON file")->required();
    compute->add_option("--p", p_path, "interface coefficient JSON file")->required();
    compute->add_option("--sigma-c", sigma_c, "core conductivity")->required();
    compute->add_option("--sigma-m", sigma_m, "background conductivity");
    compute->add_option("--out", out_path, "output JSON path");
    CommonOpts c_compute;
    add_common(compute, c_compute);

    // design
    auto* design = app.add_subcommand("design", "search interface coefficients that zero leading GPTs");
    std::string design_path, design_out = "design_result.json";
    design->add_option("--design", design_path, "design spec JSON file")->required();
    design->add_option("--out", design_out, "output JSON path");
    CommonOpts c_design;
    add_common(design, c_design);

    // render
    auto* render = app.add_subcommand("render", "sample the potential on a grid and export CSV/JSON/SVG");
    std::string r_shape, r_p, r_grid = "-2,2,-2,2,201,201", r_incident = "x1", r_mode = "bvp",
                r_prefix = "field";
    double r_sc = 5.0, r_sm = 1.0;
    int r_levels = 21;
    render->add_option("--shape", r_shape, "shape JSON file")->required();
    render->add_option("--p", r_p, "interface coefficient JSON (or design result) file")->required();
    render->add_option("--sigma-c", r_sc, "core conductivity")->required();
    render->add_option("--sigma-m", r_sm, "background conductivity");
    render->add_option("--grid", r_grid, "x0,x1,y0,y1,nx,ny");
    render->add_option("--levels", r_levels, "number of contour levels")->check(CLI::Range(1, 999));
    render->add_option("--incident", r_incident, "incident field: x1 or x2");
    render->add_option("--solution-mode", r_mode, "series or bvp");
    render->add_option("--out-prefix", r_prefix, "output file prefix");
    CommonOpts c_render;
    add_common(render, c_render);

    // verify
    auto* verify = app.add_subcommand("verify", "check interface conditions of the solved field");
    std::string v_shape, v_p, v_incident = "x1", v_mode = "bvp";
    double v_sc = 5.0, v_sm = 1.0;
    int v_coll = 256;
    verify->add_option("--shape", v_shape, "shape JSON file")->required();
    verify->add_option("--p", v_p, "interface coefficient JSON file")->required();
    verify->add_option("--sigma-c", v_sc, "core conductivity")->required();
    verify->add_option("--sigma-m", v_sm, "background conductivity");
    verify->add_option("--collocation", v_coll, "collocation point count")->check(CLI::Range(8, 65536));
    verify->add_option("--incident", v_incident, "incident field: x1 or x2");
    verify->add_option("--solution-mode", v_mode, "which solution gates the exit code: series or bvp");
    CommonOpts c_verify;
    add_common(verify, c_verify);

    // reproduce
    auto* reproduce = app.add_subcommand("reproduce", "recompute a bundled result table from scratch");
    int r_table = 1, rep_seeds = 8;
    reproduce->add_option("--table", r_table, "table number (1 or 2)")->check(CLI::Range(1, 2));
    reproduce->add_option("--seeds", rep_seeds, "random starts for each design")->check(CLI::Range(0, 64));
    CommonOpts c_reproduce;
    add_common(reproduce, c_reproduce);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (compute->parsed()) return cmd_compute(shape_path, p_path, sigma_c, sigma_m, c_compute, out_path);
        if (design->parsed()) return cmd_design(design_path, c_design, design_out);
        if (render->parsed())
            return cmd_render(r_shape, r_p, r_sc, r_sm, r_grid, r_levels, r_incident, r_mode, c_render,
                              r_prefix);
        if (verify->parsed())
            return cmd_verify(v_shape, v_p, v_sc, v_sm, v_coll, v_incident, v_mode, c_verify);
        if (reproduce->parsed()) return cmd_reproduce(r_table, c_reproduce, rep_seeds);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

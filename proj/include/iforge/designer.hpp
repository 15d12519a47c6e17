// Multi-start damped Newton search for interface coefficients that zero the
// leading first-row Faber polarization tensors,
//     p^{k+1} = p^k - a J^+(p^k) f(p^k),
// with a finite-difference Jacobian and an SVD pseudo-inverse.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "iforge/common.hpp"
#include "iforge/tensors.hpp"

namespace iforge {

struct DesignProblem {
    ConformalMap map;
    MaterialParams mat;
    std::vector<int> active_indices;  // indices of h*p coefficients allowed to vary
    int n_orders = 1;                 // vanish F^(1)_{1n}, F^(2)_{1n} for n <= n_orders
    bool real_only = true;
    bool paper_residual_mode = false;  // residual as magnitudes instead of Re/Im parts
    double alpha_lr = 0.5;
    double fd_step = 1e-6;
    int max_iter = 50;
    double tol_step = 1e-15;
    double tol_residual = 1e-10;
    int n_seeds = 8;
    std::uint64_t seed = 12345;
    int n_trunc = 100;

    DesignProblem(ConformalMap m, MaterialParams mt, std::vector<int> active, int orders)
        : map(std::move(m)), mat(mt), active_indices(std::move(active)), n_orders(orders) {
        if (active_indices.empty()) throw ConfigError("design: no active coefficient indices");
        std::sort(active_indices.begin(), active_indices.end());
        if (active_indices.front() < 0) throw ConfigError("design: negative coefficient index");
        if (std::adjacent_find(active_indices.begin(), active_indices.end()) != active_indices.end())
            throw ConfigError("design: duplicate coefficient index");
        if (n_orders < 1) throw ConfigError("design: n_orders must be >= 1");
    }

    int dof() const {
        int d = 0;
        for (int k : active_indices) d += (k == 0 || real_only) ? 1 : 2;
        return d;
    }

    // residual component count the Newton step works against
    int residual_size() const { return (paper_residual_mode ? 2 : 4) * n_orders; }

    bool underdetermined() const { return dof() < residual_size(); }
};

struct DesignResult {
    std::vector<Complex> p_coeffs;  // best solution, densely indexed 0..max(active)
    double final_residual = std::numeric_limits<double>::infinity();  // max-norm
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;  // 2-norm per iteration, best seed
    TensorSet final_gpt_block;
    std::vector<std::vector<Complex>> distinct_solutions;  // all converged, pairwise distance > 1e-6
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        nlohmann::json j;
        auto dump_p = [](const std::vector<Complex>& p) {
            nlohmann::json arr = nlohmann::json::array();
            for (const Complex& c : p) arr.push_back({c.real(), c.imag()});
            return arr;
        };
        j["p"] = dump_p(p_coeffs);
        j["final_residual"] = final_residual;
        j["converged"] = converged;
        j["iterations"] = iterations;
        j["residual_history"] = residual_history;
        j["gpt_block"] = final_gpt_block.to_json();
        auto& ds = j["distinct_solutions"] = nlohmann::json::array();
        for (const auto& sol : distinct_solutions) ds.push_back(dump_p(sol));
        j["warnings"] = warnings;
        return j;
    }
};

namespace detail {

struct DesignSpace {
    const DesignProblem* prob;

    std::vector<Complex> unpack(const VectorXd& x) const {
        std::vector<Complex> p(prob->active_indices.back() + 1, Complex(0.0, 0.0));
        int i = 0;
        for (int k : prob->active_indices) {
            if (k == 0 || prob->real_only)
                p[k] = Complex(x[i++], 0.0);
            else {
                p[k] = Complex(x[i], x[i + 1]);
                i += 2;
            }
        }
        return p;
    }

    InterfaceFunction make_ifn(const VectorXd& x) const {
        return InterfaceFunction(prob->map.gamma(), unpack(x));
    }
};

}  // namespace detail

// Residual vector at the given interface coefficients.  Default mode stacks
// Re and Im of F^(1)_{1n}/(4 pi n) then F^(2)_{1n}/(4 pi n); paper mode
// stacks the two blocks of magnitudes instead.
inline VectorXd design_residual(const DesignProblem& prob, const MapOperators& ops,
                                const InterfaceFunction& ifn) {
    SystemMatrices sys = assemble_system(ops, ifn, prob.mat);
    FptPair fpt = detail::fpt_rows(sys, 1);
    VectorXd r(prob.residual_size());
    if (prob.paper_residual_mode) {
        for (int n = 1; n <= prob.n_orders; ++n) {
            r[n - 1] = std::abs(fpt.f1(0, n - 1)) / (4.0 * kPi * n);
            r[prob.n_orders + n - 1] = std::abs(fpt.f2(0, n - 1)) / (4.0 * kPi * n);
        }
    } else {
        for (int n = 1; n <= prob.n_orders; ++n) {
            const Complex v1 = fpt.f1(0, n - 1) / (4.0 * kPi * n);
            const Complex v2 = fpt.f2(0, n - 1) / (4.0 * kPi * n);
            r[4 * (n - 1) + 0] = v1.real();
            r[4 * (n - 1) + 1] = v1.imag();
            r[4 * (n - 1) + 2] = v2.real();
            r[4 * (n - 1) + 3] = v2.imag();
        }
    }
    return r;
}

// Convenience overload matching the spec surface (builds the operators).
inline VectorXd design_residual(const DesignProblem& prob, const std::vector<Complex>& p_coeffs) {
    FaberTable faber(prob.map, prob.n_trunc);
    MapOperators ops = make_map_operators(prob.map, faber);
    return design_residual(prob, ops, InterfaceFunction(prob.map.gamma(), p_coeffs));
}

inline DesignResult newton_solve(const DesignProblem& prob) {
    DesignResult result;
    if (prob.underdetermined())
        result.warnings.push_back(
            "design is underdetermined: " + std::to_string(prob.dof()) + " degrees of freedom vs " +
            std::to_string(prob.residual_size()) + " residual components; returning best effort");

    FaberTable faber(prob.map, prob.n_trunc);
    MapOperators ops = make_map_operators(prob.map, faber);
    detail::DesignSpace space{&prob};
    const int nd = prob.dof();

    auto eval = [&](const VectorXd& x) -> VectorXd {
        return design_residual(prob, ops, space.make_ifn(x));
    };

    // seed list: the constant neutral-disk guess p_0 = tau first, then
    // uniform draws with coefficient magnitude below 2
    std::vector<VectorXd> seeds;
    {
        VectorXd x0 = VectorXd::Zero(nd);
        int i = 0;
        for (int k : prob.active_indices) {
            if (k == 0) x0[i] = prob.mat.tau();
            i += (k == 0 || prob.real_only) ? 1 : 2;
        }
        seeds.push_back(x0);
        std::mt19937_64 rng(prob.seed);
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        std::uniform_real_distribution<double> mag(0.0, 2.0);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
        for (int sdx = 0; sdx < prob.n_seeds; ++sdx) {
            VectorXd x(nd);
            int j = 0;
            for (int k : prob.active_indices) {
                if (k == 0 || prob.real_only)
                    x[j++] = unif(rng);
                else {
                    const double r = mag(rng), a = ang(rng);
                    x[j++] = r * std::cos(a);
                    x[j++] = r * std::sin(a);
                }
            }
            seeds.push_back(x);
        }
    }

    struct SeedOutcome {
        VectorXd x;
        double res_inf = std::numeric_limits<double>::infinity();
        double res_two = std::numeric_limits<double>::infinity();
        std::vector<double> history;
        int iterations = 0;
        bool ok = false;
    };
    std::vector<SeedOutcome> outcomes(seeds.size());

    for (std::size_t sdx = 0; sdx < seeds.size(); ++sdx) {
        SeedOutcome& oc = outcomes[sdx];
        VectorXd x = seeds[sdx];
        double r0 = -1.0;
        bool aborted = false;
        for (int it = 0; it < prob.max_iter && !aborted; ++it) {
            oc.iterations = it + 1;
            VectorXd r;
            try {
                r = eval(x);
            } catch (const std::exception&) {
                aborted = true;
                break;
            }
            const double rn = r.norm();
            oc.history.push_back(rn);
            if (!std::isfinite(rn)) {
                aborted = true;
                break;
            }
            if (r0 < 0.0) r0 = rn;
            if (rn > 1e6 * std::max(r0, 1e-30)) {  // divergence guard
                aborted = true;
                break;
            }
            if (rn == 0.0) break;

            // central-difference Jacobian, one column per degree of freedom
            MatrixXd J(r.size(), nd);
            bool jac_ok = true;
            parallel_for(nd, [&](std::size_t j) {
                const double h = prob.fd_step * std::max(1.0, std::abs(x[j]));
                VectorXd xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                try {
                    J.col(j) = (eval(xp) - eval(xm)) / (2.0 * h);
                } catch (const std::exception&) {
                    jac_ok = false;
                }
            });
            if (!jac_ok || !J.allFinite()) {
                aborted = true;
                break;
            }

            Eigen::JacobiSVD<MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const VectorXd& sv = svd.singularValues();
            const double cut = 1e-12 * sv[0];
            VectorXd ur = svd.matrixU().transpose() * r;
            for (int i = 0; i < sv.size(); ++i) ur[i] = sv[i] > cut ? ur[i] / sv[i] : 0.0;
            const VectorXd step = svd.matrixV() * ur;

            // backtracking on the learning rate when the residual grows
            double a = prob.alpha_lr;
            VectorXd best_x = x - a * step;
            double best_rn = std::numeric_limits<double>::infinity();
            try {
                best_rn = eval(best_x).norm();
            } catch (const std::exception&) {
            }
            for (int bt = 0; bt < 8 && !(best_rn < rn); ++bt) {
                a *= 0.5;
                VectorXd cand = x - a * step;
                double cn = std::numeric_limits<double>::infinity();
                try {
                    cn = eval(cand).norm();
                } catch (const std::exception&) {
                }
                if (cn < best_rn) {
                    best_x = cand;
                    best_rn = cn;
                }
            }
            if (!std::isfinite(best_rn)) {
                aborted = true;
                break;
            }
            const double xn = x.norm();
            const double rel = xn > 0.0 ? (best_x - x).norm() / xn : std::numeric_limits<double>::infinity();
            x = best_x;
            if (rel < prob.tol_step) break;
        }
        if (aborted) continue;
        VectorXd r;
        try {
            r = eval(x);
        } catch (const std::exception&) {
            continue;
        }
        oc.x = x;
        oc.res_inf = r.lpNorm<Eigen::Infinity>();
        oc.res_two = r.norm();
        oc.ok = r.allFinite();
    }

    // best = smallest max-norm residual, ties broken by coefficient norm
    int best = -1;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].ok) continue;
        if (best < 0) {
            best = static_cast<int>(i);
            continue;
        }
        const SeedOutcome& a = outcomes[i];
        const SeedOutcome& b = outcomes[best];
        const bool a_conv = a.res_inf <= prob.tol_residual, b_conv = b.res_inf <= prob.tol_residual;
        bool better;
        if (a_conv != b_conv)
            better = a_conv;
        else if (a_conv)  // both converged: prefer the least-extreme coefficients
            better = a.x.norm() < b.x.norm() - 1e-12;
        else
            better = a.res_inf < b.res_inf;
        if (better) best = static_cast<int>(i);
    }
    if (best < 0) {
        result.warnings.push_back("no seed produced a finite result");
        return result;
    }

    const SeedOutcome& bo = outcomes[best];
    result.p_coeffs = space.unpack(bo.x);
    result.final_residual = bo.res_inf;
    result.converged = bo.res_inf <= prob.tol_residual;
    result.iterations = bo.iterations;
    result.residual_history = bo.history;

    // collect distinct converged solutions across seeds
    for (const SeedOutcome& oc : outcomes) {
        if (!oc.ok || oc.res_inf > prob.tol_residual) continue;
        bool dup = false;
        for (const auto& sol : result.distinct_solutions) {
            double d2 = 0.0;
            const std::vector<Complex> pc = space.unpack(oc.x);
            for (std::size_t k = 0; k < std::max(sol.size(), pc.size()); ++k) {
                const Complex a = k < sol.size() ? sol[k] : Complex(0, 0);
                const Complex b = k < pc.size() ? pc[k] : Complex(0, 0);
                d2 += std::norm(a - b);
            }
            if (std::sqrt(d2) <= 1e-6) {
                dup = true;
                break;
            }
        }
        if (!dup) result.distinct_solutions.push_back(space.unpack(oc.x));
    }

    InterfaceFunction ifn = space.make_ifn(bo.x);
    SystemMatrices sys = assemble_system(ops, ifn, prob.mat);
    result.final_gpt_block = compute_tensors(sys, faber, std::max(4, prob.n_orders));
    return result;
}

}  // namespace iforge

// Potential evaluation from solved series coefficients, pointwise
// verification of the two interface conditions, conversion to standard
// multipole coefficients, grid sampling, and CSV/JSON/SVG export with
// marching-squares contour extraction.
#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "iforge/common.hpp"
#include "iforge/conformal.hpp"
#include "iforge/faber.hpp"
#include "iforge/interface.hpp"
#include "iforge/tensors.hpp"

namespace iforge {

// Row-summed view of a SolutionCoefficients bundle; all evaluation below
// goes through this.
class FieldEvaluator {
public:
    FieldEvaluator(const ConformalMap& map, const FaberTable& faber, const SolutionCoefficients& sol)
        : map_(map), n_(static_cast<int>(sol.s.cols())) {
        alpha_ = sol.alpha;
        top_alpha_ = 0;
        for (int m = 0; m < alpha_.size(); ++m)
            if (alpha_[m] != Complex(0.0, 0.0)) top_alpha_ = m + 1;
        svec_ = sol.s.colwise().sum().transpose();
        bvec_ = sol.beta.colwise().sum().transpose();
        gvec_ = (MatrixXcd(sol.alpha.asDiagonal()) * faber.c() + sol.s).colwise().sum().transpose();
        dvec_ = (sol.beta * faber.c()).colwise().sum().transpose();
        c0_ = sol.interior_const.sum();
    }

    const ConformalMap& map() const { return map_; }
    int order() const { return n_; }

    // incident field H(z) = Re[sum alpha_m F_m(z)]
    double incident(Complex z) const {
        if (top_alpha_ == 0) return 0.0;
        const std::vector<Complex> F = FaberTable::faber_values(map_, z, top_alpha_);
        Complex acc(0.0, 0.0);
        for (int m = 1; m <= top_alpha_; ++m) acc += alpha_[m - 1] * F[m];
        return acc.real();
    }

    // exterior u at z (inverts the map) or directly at w
    double exterior(Complex z) const { return exterior_w(map_.invert(z), z); }

    double exterior_w(Complex w, Complex z) const {
        const Complex invw = 1.0 / w;
        Complex tail(0.0, 0.0);
        for (int n = n_; n >= 1; --n) tail = (tail + svec_[n - 1]) * invw;
        return incident(z) + tail.real();
    }

    // interior u at z
    double interior(Complex z) const {
        const std::vector<Complex> F = FaberTable::faber_values(map_, z, n_);
        Complex acc(0.0, 0.0);
        for (int n = 1; n <= n_; ++n) acc += bvec_[n - 1] * F[n];
        return c0_ + acc.real();
    }

    // traces and rho-derivatives on |w| = gamma e^{rho - rho0}; used by the
    // residual check and by its finite-difference cross-check
    double exterior_series(double rho, double theta) const {
        const Complex w = std::polar(std::exp(rho), theta);
        Complex acc(0.0, 0.0);
        for (int m = 1; m <= top_alpha_; ++m) acc += alpha_[m - 1] * std::pow(w, m);
        for (int n = 1; n <= n_; ++n) acc += gvec_[n - 1] * std::pow(w, -n);
        return acc.real();
    }

    double interior_series(double rho, double theta) const {
        const Complex w = std::polar(std::exp(rho), theta);
        Complex acc(0.0, 0.0);
        for (int n = 1; n <= n_; ++n) acc += bvec_[n - 1] * std::pow(w, n) + dvec_[n - 1] * std::pow(w, -n);
        return c0_ + acc.real();
    }

    double exterior_series_drho(double rho, double theta) const {
        const Complex w = std::polar(std::exp(rho), theta);
        Complex acc(0.0, 0.0);
        for (int m = 1; m <= top_alpha_; ++m) acc += double(m) * alpha_[m - 1] * std::pow(w, m);
        for (int n = 1; n <= n_; ++n) acc -= double(n) * gvec_[n - 1] * std::pow(w, -n);
        return acc.real();
    }

    double exterior_series_dtheta(double rho, double theta) const {
        const Complex w = std::polar(std::exp(rho), theta);
        Complex acc(0.0, 0.0);
        for (int m = 1; m <= top_alpha_; ++m) acc += double(m) * alpha_[m - 1] * std::pow(w, m);
        for (int n = 1; n <= n_; ++n) acc += double(n) * gvec_[n - 1] * std::pow(w, -n);
        return (Complex(0.0, 1.0) * acc).real();
    }

    double interior_series_drho(double rho, double theta) const {
        const Complex w = std::polar(std::exp(rho), theta);
        Complex acc(0.0, 0.0);
        for (int n = 1; n <= n_; ++n)
            acc += double(n) * bvec_[n - 1] * std::pow(w, n) - double(n) * dvec_[n - 1] * std::pow(w, -n);
        return acc.real();
    }

private:
    const ConformalMap& map_;
    int n_;
    VectorXcd alpha_, svec_, bvec_, gvec_, dvec_;
    int top_alpha_ = 0;
    double c0_ = 0.0;
};

struct ResidualReport {
    double max_flux_residual = 0.0;
    double max_jump_residual = 0.0;
    int n_collocation = 0;

    nlohmann::json to_json() const {
        return {{"max_flux_residual", max_flux_residual},
                {"max_jump_residual", max_jump_residual},
                {"n_collocation", n_collocation}};
    }
};

// Pointwise residuals of
//   flux:  sm du/dnu|+ - sc du/dnu|-        jump:  p (u|+ - u|-) - sm du/dnu|+
// at equispaced boundary angles, normalized by sm * max |grad u|+.
// The one-sided normal derivatives come from termwise rho-differentiation
// of the two series; analytic=false uses one-sided difference quotients at
// rho0 +/- 1e-6 instead, as an independent cross-check of that step.
inline ResidualReport boundary_residual(const SolutionCoefficients& sol, const ConformalMap& map,
                                        const FaberTable& faber, const InterfaceFunction& ifn,
                                        const MaterialParams& mat, int n_collocation = 256,
                                        bool analytic = true) {
    FieldEvaluator ev(map, faber, sol);
    const double rho0 = map.rho0();
    ResidualReport rep;
    rep.n_collocation = n_collocation;

    std::vector<double> flux(n_collocation), jump(n_collocation), grad(n_collocation);
    const double fd = 1e-6;
    for (int j = 0; j < n_collocation; ++j) {
        const double th = 2.0 * kPi * j / n_collocation;
        const double h = map.scale_factor(rho0, th);
        double dpl, dmi;
        if (analytic) {
            dpl = ev.exterior_series_drho(rho0, th);
            dmi = ev.interior_series_drho(rho0, th);
        } else {
            dpl = (ev.exterior_series(rho0 + fd, th) - ev.exterior_series(rho0, th)) / fd;
            dmi = (ev.interior_series(rho0, th) - ev.interior_series(rho0 - fd, th)) / fd;
        }
        const double up = ev.exterior_series(rho0, th);
        const double um = ev.interior_series(rho0, th);
        const double p = ifn.eval_weighted(th) / h;
        const double dth = ev.exterior_series_dtheta(rho0, th);
        flux[j] = mat.sigma_m * dpl / h - mat.sigma_c * dmi / h;
        jump[j] = p * (up - um) - mat.sigma_m * dpl / h;
        grad[j] = std::hypot(dpl, dth) / h;
    }
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, g);
    const double scale = mat.sigma_m * std::max(gmax, 1e-300);
    for (int j = 0; j < n_collocation; ++j) {
        rep.max_flux_residual = std::max(rep.max_flux_residual, std::abs(flux[j]) / scale);
        rep.max_jump_residual = std::max(rep.max_jump_residual, std::abs(jump[j]) / scale);
    }
    return rep;
}

// Coefficients of z^{-n} in the far-field expansion
//   u = H - Re[ sum_n (1/(4 pi n)) sum_m (alpha_m N1_{mn} + conj(alpha_m) N2_{mn}) z^{-n} ].
inline std::vector<Complex> multipole_coefficients(const TensorSet& t, const VectorXcd& alpha) {
    const int r = static_cast<int>(t.n1.rows());
    if (alpha.size() < r) throw ConfigError("multipole_coefficients: alpha shorter than tensor block");
    std::vector<Complex> out(r);
    for (int n = 1; n <= r; ++n) {
        Complex acc(0.0, 0.0);
        for (int m = 1; m <= r; ++m)
            acc += alpha[m - 1] * t.n1(m - 1, n - 1) + std::conj(alpha[m - 1]) * t.n2(m - 1, n - 1);
        out[n - 1] = -acc / (4.0 * kPi * n);
    }
    return out;
}

struct GridBounds {
    double x0, x1, y0, y1;
};

struct FieldGrid {
    GridBounds bounds{};
    int nx = 0, ny = 0;
    std::vector<double> values;     // row-major, ny rows of nx; NaN where missing
    std::vector<PointClass> mask;

    double x(int i) const { return nx > 1 ? bounds.x0 + (bounds.x1 - bounds.x0) * i / (nx - 1) : bounds.x0; }
    double y(int j) const { return ny > 1 ? bounds.y0 + (bounds.y1 - bounds.y0) * j / (ny - 1) : bounds.y0; }
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
    PointClass region(int i, int j) const { return mask[static_cast<std::size_t>(j) * nx + i]; }
};

inline FieldGrid sample_grid(const SolutionCoefficients& sol, const ConformalMap& map,
                             const FaberTable& faber, const GridBounds& bounds, int nx, int ny) {
    if (nx < 2 || ny < 2) throw ConfigError("sample_grid: resolution must be at least 2x2");
    FieldEvaluator ev(map, faber, sol);
    FieldGrid grid;
    grid.bounds = bounds;
    grid.nx = nx;
    grid.ny = ny;
    grid.values.assign(static_cast<std::size_t>(nx) * ny, std::numeric_limits<double>::quiet_NaN());
    grid.mask.assign(static_cast<std::size_t>(nx) * ny, PointClass::boundary_band);

    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t j) {
        for (int i = 0; i < nx; ++i) {
            const Complex z(grid.x(i), grid.y(static_cast<int>(j)));
            const std::size_t idx = j * nx + i;
            const PointClass pc = map.classify(z);
            grid.mask[idx] = pc;
            try {
                if (pc == PointClass::interior)
                    grid.values[idx] = ev.interior(z);
                else if (pc == PointClass::exterior)
                    grid.values[idx] = ev.exterior(z);
            } catch (const NumericalError&) {
                grid.mask[idx] = PointClass::boundary_band;  // inversion failed: too close
            }
        }
    });
    return grid;
}

inline const char* region_name(PointClass pc) {
    switch (pc) {
        case PointClass::interior: return "interior";
        case PointClass::exterior: return "exterior";
        default: return "boundary";
    }
}

inline void write_grid_csv(const FieldGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "x,y,u,region\n";
    char buf[80];
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const double u = grid.at(i, j);
            if (std::isfinite(u))
                std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%s", grid.x(i), grid.y(j), u,
                              region_name(grid.region(i, j)));
            else
                std::snprintf(buf, sizeof buf, "%.12g,%.12g,,%s", grid.x(i), grid.y(j),
                              region_name(grid.region(i, j)));
            out << buf << '\n';
        }
}

inline void write_grid_json(const FieldGrid& grid, const std::string& path) {
    nlohmann::json j;
    j["bounds"] = {grid.bounds.x0, grid.bounds.x1, grid.bounds.y0, grid.bounds.y1};
    j["nx"] = grid.nx;
    j["ny"] = grid.ny;
    auto& vals = j["values"] = nlohmann::json::array();
    auto& regs = j["region"] = nlohmann::json::array();
    for (std::size_t k = 0; k < grid.values.size(); ++k) {
        if (std::isfinite(grid.values[k]))
            vals.push_back(grid.values[k]);
        else
            vals.push_back(nullptr);
        regs.push_back(region_name(grid.mask[k]));
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << j.dump(1, '\t') << '\n';
}

struct ContourSet {
    std::vector<double> levels;
    // polylines[k] = list of chains for level k, each chain a list of (x, y)
    std::vector<std::vector<std::vector<std::array<double, 2>>>> polylines;
};

namespace detail {

struct SegKey {
    long long a, b;
    bool operator<(const SegKey& o) const { return a != o.a ? a < o.a : b < o.b; }
};

inline SegKey quantize(std::array<double, 2> pt, double sx, double sy, const GridBounds& b) {
    const long long qa = llround((pt[0] - b.x0) * sx);
    const long long qb = llround((pt[1] - b.y0) * sy);
    return SegKey{qa, qb};
}

}  // namespace detail

// Marching squares restricted to cells whose four corners are finite and in
// the same region, so contours never cross the (discontinuous) interface.
inline ContourSet extract_contours(const FieldGrid& grid, const std::vector<double>& levels) {
    ContourSet cs;
    cs.levels = levels;
    cs.polylines.resize(levels.size());
    const double sx = 1e9 / std::max(grid.bounds.x1 - grid.bounds.x0, 1e-300);
    const double sy = 1e9 / std::max(grid.bounds.y1 - grid.bounds.y0, 1e-300);

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double lev = levels[li];
        std::vector<std::array<std::array<double, 2>, 2>> segs;
        for (int j = 0; j + 1 < grid.ny; ++j) {
            for (int i = 0; i + 1 < grid.nx; ++i) {
                const double v00 = grid.at(i, j), v10 = grid.at(i + 1, j);
                const double v01 = grid.at(i, j + 1), v11 = grid.at(i + 1, j + 1);
                if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11))
                    continue;
                const PointClass r = grid.region(i, j);
                if (grid.region(i + 1, j) != r || grid.region(i, j + 1) != r || grid.region(i + 1, j + 1) != r)
                    continue;
                int mask = 0;
                if (v00 >= lev) mask |= 1;
                if (v10 >= lev) mask |= 2;
                if (v11 >= lev) mask |= 4;
                if (v01 >= lev) mask |= 8;
                if (mask == 0 || mask == 15) continue;
                const double x0 = grid.x(i), x1 = grid.x(i + 1);
                const double y0 = grid.y(j), y1 = grid.y(j + 1);
                auto lerp = [lev](double a, double b, double pa, double pb) {
                    const double t = (lev - a) / (b - a);
                    return pa + t * (pb - pa);
                };
                // edge midpoints: 0 bottom, 1 right, 2 top, 3 left
                std::array<std::array<double, 2>, 4> pt{};
                pt[0] = {lerp(v00, v10, x0, x1), y0};
                pt[1] = {x1, lerp(v10, v11, y0, y1)};
                pt[2] = {lerp(v01, v11, x0, x1), y1};
                pt[3] = {x0, lerp(v00, v01, y0, y1)};
                auto add = [&](int ea, int eb) { segs.push_back({pt[ea], pt[eb]}); };
                switch (mask) {
                    case 1: case 14: add(3, 0); break;
                    case 2: case 13: add(0, 1); break;
                    case 3: case 12: add(3, 1); break;
                    case 4: case 11: add(1, 2); break;
                    case 6: case 9:  add(0, 2); break;
                    case 7: case 8:  add(3, 2); break;
                    case 5: case 10: {
                        const double c = 0.25 * (v00 + v10 + v01 + v11);
                        const bool flip = (c >= lev) == (mask == 5);
                        if (flip) { add(3, 2); add(0, 1); }
                        else { add(3, 0); add(1, 2); }
                        break;
                    }
                    default: break;
                }
            }
        }
        // chain segments by shared endpoints
        std::multimap<detail::SegKey, std::size_t> ends;
        std::vector<bool> used(segs.size(), false);
        for (std::size_t si = 0; si < segs.size(); ++si) {
            ends.insert({detail::quantize(segs[si][0], sx, sy, grid.bounds), si});
            ends.insert({detail::quantize(segs[si][1], sx, sy, grid.bounds), si});
        }
        auto same_key = [](const detail::SegKey& a, const detail::SegKey& b) {
            return !(a < b) && !(b < a);
        };
        auto take_next = [&](const std::array<double, 2>& endpt) -> long long {
            auto range = ends.equal_range(detail::quantize(endpt, sx, sy, grid.bounds));
            for (auto it = range.first; it != range.second; ++it)
                if (!used[it->second]) return static_cast<long long>(it->second);
            return -1;
        };
        for (std::size_t si = 0; si < segs.size(); ++si) {
            if (used[si]) continue;
            used[si] = true;
            std::vector<std::array<double, 2>> chain{segs[si][0], segs[si][1]};
            for (int dir = 0; dir < 2; ++dir) {
                for (;;) {
                    const std::array<double, 2>& tip = dir == 0 ? chain.back() : chain.front();
                    const long long nxt = take_next(tip);
                    if (nxt < 0) break;
                    used[nxt] = true;
                    const auto& s = segs[nxt];
                    const auto tip_key = detail::quantize(tip, sx, sy, grid.bounds);
                    const auto& other =
                        same_key(detail::quantize(s[0], sx, sy, grid.bounds), tip_key) ? s[1] : s[0];
                    if (dir == 0)
                        chain.push_back(other);
                    else
                        chain.insert(chain.begin(), other);
                }
            }
            cs.polylines[li].push_back(std::move(chain));
        }
    }
    return cs;
}

inline std::vector<double> even_levels(const FieldGrid& grid, int count) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : grid.values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    std::vector<double> lv;
    if (!(hi > lo)) return lv;
    for (int k = 1; k <= count; ++k) lv.push_back(lo + (hi - lo) * k / (count + 1));
    return lv;
}

inline void write_contours_svg(const ContourSet& cs, const GridBounds& b, const ConformalMap& map,
                               const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    char buf[160];
    const double w = b.x1 - b.x0, h = b.y1 - b.y0;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.8g %.8g %.8g %.8g\">\n", b.x0,
                  b.y0, w, h);
    out << buf;
    const double stroke = 0.004 * std::max(w, h);
    auto flip = [&](double y) { return b.y0 + b.y1 - y; };
    for (std::size_t li = 0; li < cs.levels.size(); ++li) {
        const int hue = static_cast<int>(li * 360 / std::max<std::size_t>(cs.levels.size(), 1));
        for (const auto& chain : cs.polylines[li]) {
            out << "<polyline fill=\"none\" stroke=\"hsl(" << hue << ",70%,45%)\" stroke-width=\""
                << stroke << "\" points=\"";
            for (const auto& pt : chain) {
                std::snprintf(buf, sizeof buf, "%.8g,%.8g ", pt[0], flip(pt[1]));
                out << buf;
            }
            out << "\"/>\n";
        }
    }
    // inclusion boundary for reference
    out << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"" << 1.5 * stroke << "\" points=\"";
    const int M = 512;
    for (int j = 0; j <= M; ++j) {
        const Complex z = map.eval(std::polar(map.gamma(), 2.0 * kPi * j / M));
        std::snprintf(buf, sizeof buf, "%.8g,%.8g ", z.real(), flip(z.imag()));
        out << buf;
    }
    out << "\"/>\n</svg>\n";
}

}  // namespace iforge

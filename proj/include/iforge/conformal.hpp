// Exterior conformal map Psi(w) = w + a0 + a1/w + ... + aK/w^K of the
// inclusion, its derivative, the scale factor of the modified polar
// coordinates (rho, theta), and point classification against the mapped
// boundary.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "iforge/common.hpp"

namespace iforge {

struct BoundaryPoint {
    double theta = 0.0;  // angle in [0, 2pi)
    double rho = 0.0;    // log-radial coordinate, >= ln(gamma) on/outside the boundary
    Complex z;           // Psi(e^{rho + i theta})
    double h = 0.0;      // scale factor e^rho |Psi'(e^{rho+i theta})|
};

enum class PointClass { interior, exterior, boundary_band };

class ConformalMap {
public:
    // coeffs holds a_0 .. a_K.  The boundary image of |w| = gamma must be a
    // Jordan curve; injectivity is checked on construction by sampling.
    ConformalMap(double gamma, std::vector<Complex> coeffs, double inward_band = 0.05)
        : gamma_(gamma), coeffs_(std::move(coeffs)), inward_band_(inward_band) {
        if (!(gamma_ > 0.0)) throw ConfigError("conformal map: gamma must be positive");
        if (coeffs_.empty()) throw ConfigError("conformal map: need at least a_0");
        if (!(inward_band_ >= 0.0 && inward_band_ < 1.0))
            throw ConfigError("conformal map: inward band must lie in [0,1)");
        check_injective();
        // caches are built eagerly so that every method below is const and
        // safe to call concurrently
        polyline_.resize(kDefaultPolyline);
        for (int j = 0; j < kDefaultPolyline; ++j)
            polyline_[j] = eval_unchecked(std::polar(gamma_, 2.0 * kPi * j / kDefaultPolyline));
        seed_table_.reserve(2048);
        seed_image_.reserve(2048);
        for (int r = 0; r < 8; ++r) {
            const double rad = gamma_ * (1.0 + 0.45 * r);
            for (int j = 0; j < 256; ++j) {
                const Complex w = std::polar(rad, 2.0 * kPi * j / 256.0);
                seed_table_.push_back(w);
                seed_image_.push_back(eval_unchecked(w));
            }
        }
    }

    static ConformalMap disk(double gamma) { return ConformalMap(gamma, {Complex(0.0, 0.0)}); }

    double gamma() const { return gamma_; }
    double rho0() const { return std::log(gamma_); }
    const std::vector<Complex>& coeffs() const { return coeffs_; }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
    double inward_band() const { return inward_band_; }

    Complex coeff(int k) const {
        return (k >= 0 && k < static_cast<int>(coeffs_.size())) ? coeffs_[k] : Complex(0.0, 0.0);
    }

    // Psi(w) = w + sum_k a_k w^{-k}.  Valid for |w| >= gamma (1 - inward_band).
    Complex eval(Complex w) const {
        require_in_domain(w);
        Complex acc(0.0, 0.0);
        const Complex inv = 1.0 / w;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * inv + *it;
        return w + acc;
    }

    // Psi'(w) = 1 - sum_{k>=1} k a_k w^{-k-1}.  Exact termwise derivative.
    Complex derivative(Complex w) const {
        require_in_domain(w);
        const Complex inv = 1.0 / w;
        Complex acc(0.0, 0.0);
        for (int k = degree(); k >= 1; --k) acc = (acc + double(k) * coeffs_[k]) * inv;
        return 1.0 - acc * inv;
    }

    // h(rho, theta) = e^rho |Psi'(e^{rho + i theta})|.
    double scale_factor(double rho, double theta) const {
        if (rho < rho0() + std::log1p(-inward_band_))
            throw ConfigError("scale_factor: rho below the admissible band");
        const double er = std::exp(rho);
        const Complex w = std::polar(er, theta);
        const double h = er * std::abs(derivative(w));
        if (!(h > 1e-12)) throw NumericalError("scale_factor: degenerate map, h < 1e-12");
        return h;
    }

    BoundaryPoint boundary_point(double theta, double rho) const {
        BoundaryPoint bp;
        bp.theta = theta;
        bp.rho = rho;
        bp.z = eval(std::polar(std::exp(rho), theta));
        bp.h = scale_factor(rho, theta);
        return bp;
    }

    // Winding number of the sampled boundary polyline around z decides the
    // region; points within band_width of the polyline are boundary-band.
    // band_width defaults to 1e-9 times the curve diameter.
    PointClass classify(Complex z, int n_samples = kDefaultPolyline, double band_width = -1.0) const {
        std::vector<Complex> fresh;
        if (n_samples != kDefaultPolyline) {
            fresh.resize(n_samples);
            for (int j = 0; j < n_samples; ++j)
                fresh[j] = eval_unchecked(std::polar(gamma_, 2.0 * kPi * j / n_samples));
        }
        const std::vector<Complex>& poly = fresh.empty() ? polyline_ : fresh;
        if (band_width < 0.0) band_width = 1e-9 * diameter_;
        double dist2 = std::numeric_limits<double>::infinity();
        int winding = 0;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Complex a = poly[i];
            const Complex b = poly[(i + 1) % poly.size()];
            dist2 = std::min(dist2, segment_dist2(z, a, b));
            // crossing test for the ray x -> +inf
            const bool below_a = a.imag() <= z.imag();
            const bool below_b = b.imag() <= z.imag();
            if (below_a != below_b) {
                const double t = (z.imag() - a.imag()) / (b.imag() - a.imag());
                const double xc = a.real() + t * (b.real() - a.real());
                if (xc > z.real()) winding += below_a ? 1 : -1;
            }
        }
        if (dist2 <= band_width * band_width) return PointClass::boundary_band;
        return winding != 0 ? PointClass::interior : PointClass::exterior;
    }

    double diameter() const { return diameter_; }

    // Inverse map on the exterior by Newton iteration, seeded from the
    // nearest precomputed annulus sample (or w ~= z - a0 far away).
    // Fails for points inside or within tol-distance of the boundary.
    Complex invert(Complex z, double tol = 1e-12, int max_iter = 60) const {
        Complex w = invert_seed(z);
        const double scale = std::max(1.0, std::abs(z));
        for (int it = 0; it < max_iter; ++it) {
            const Complex f = eval_unchecked(w) - z;
            if (std::abs(f) <= tol * scale) {
                if (std::abs(w) < gamma_ * (1.0 - 0.5 * inward_band_))
                    throw NumericalError("invert: image point maps inside the inclusion");
                return w;
            }
            const Complex d = derivative_unchecked(w);
            if (std::abs(d) < 1e-300) break;
            Complex step = f / d;
            // keep the iterate out of the deep interior where the series diverges
            Complex next = w - step;
            for (int bt = 0; bt < 40 && std::abs(next) < gamma_ * 0.5; ++bt) {
                step *= 0.5;
                next = w - step;
            }
            w = next;
        }
        throw NumericalError("invert: Newton iteration failed to converge (point too close to the boundary?)");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["gamma"] = gamma_;
        auto& arr = j["coeffs"] = nlohmann::json::array();
        for (const Complex& a : coeffs_) arr.push_back({a.real(), a.imag()});
        return j;
    }

    static ConformalMap from_json(const nlohmann::json& j) {
        if (!j.contains("gamma") || !j.contains("coeffs"))
            throw ConfigError("shape file: expected fields \"gamma\" and \"coeffs\"");
        std::vector<Complex> coeffs;
        for (const auto& e : j.at("coeffs")) {
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("shape file: each coefficient must be [re, im]");
            coeffs.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return ConformalMap(j.at("gamma").get<double>(), std::move(coeffs));
    }

    static ConformalMap load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("shape file: cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ConfigError("shape file: parse error in " + path + ": " + e.what());
        }
        return from_json(j);
    }

private:
    static constexpr int kDefaultPolyline = 2048;

    double gamma_;
    std::vector<Complex> coeffs_;
    double inward_band_;
    std::vector<Complex> polyline_;  // boundary samples at the default resolution
    std::vector<Complex> seed_table_, seed_image_;
    double diameter_ = 0.0;

    void require_in_domain(Complex w) const {
        const double r = std::abs(w);
        if (r == 0.0) throw ConfigError("conformal map: w = 0 is not in the domain");
        if (r < gamma_ * (1.0 - inward_band_) * (1.0 - 1e-12))
            throw ConfigError("conformal map: |w| below the admissible band");
    }

    Complex eval_unchecked(Complex w) const {
        Complex acc(0.0, 0.0);
        const Complex inv = 1.0 / w;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * inv + *it;
        return w + acc;
    }

    Complex derivative_unchecked(Complex w) const {
        const Complex inv = 1.0 / w;
        Complex acc(0.0, 0.0);
        for (int k = degree(); k >= 1; --k) acc = (acc + double(k) * coeffs_[k]) * inv;
        return 1.0 - acc * inv;
    }

    static double segment_dist2(Complex z, Complex a, Complex b) {
        const Complex ab = b - a;
        const double len2 = std::norm(ab);
        double t = len2 > 0.0 ? ((z - a).real() * ab.real() + (z - a).imag() * ab.imag()) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return std::norm(z - (a + t * ab));
    }

    // Injectivity of Psi restricted to |w| = gamma, checked on M samples:
    // non-neighbouring samples must stay separated relative to the diameter.
    void check_injective() {
        const int M = 1024;
        std::vector<Complex> pts(M);
        double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
        for (int j = 0; j < M; ++j) {
            pts[j] = eval_unchecked(std::polar(gamma_, 2.0 * kPi * j / M));
            lo_x = std::min(lo_x, pts[j].real());
            hi_x = std::max(hi_x, pts[j].real());
            lo_y = std::min(lo_y, pts[j].imag());
            hi_y = std::max(hi_y, pts[j].imag());
        }
        diameter_ = std::hypot(hi_x - lo_x, hi_y - lo_y);
        if (!(diameter_ > 0.0)) throw ConfigError("conformal map: boundary degenerates to a point");
        double min_sep = std::numeric_limits<double>::infinity();
        for (int i = 0; i < M; ++i)
            for (int j = i + 2; j < M; ++j) {
                if (i == 0 && j == M - 1) continue;  // circular neighbours
                min_sep = std::min(min_sep, std::norm(pts[i] - pts[j]));
            }
        if (std::sqrt(min_sep) < 1e-6 * diameter_)
            throw ConfigError("conformal map: boundary self-intersects (injectivity check failed)");
        for (int j = 0; j < M; ++j) {
            const double h = gamma_ * std::abs(derivative_unchecked(std::polar(gamma_, 2.0 * kPi * j / M)));
            if (!(h > 1e-12)) throw ConfigError("conformal map: degenerate boundary parametrization");
        }
    }

    Complex invert_seed(Complex z) const {
        if (std::abs(z - coeff(0)) > 3.0 * gamma_) return z - coeff(0);
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < seed_table_.size(); ++i) {
            const double d = std::norm(z - seed_image_[i]);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return seed_table_[best];
    }
};

}  // namespace iforge

// The weighted interface parameter h*p as a Laurent series on |w| = gamma,
//     h(rho0,theta) p(theta) = sum_n p_n w^n,   p_{-n} = conj(p_n) gamma^{2n},
// and its Hankel / Hermitian-Toeplitz coefficient matrices P+ and P-.
#pragma once

#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "iforge/common.hpp"
#include "iforge/conformal.hpp"

namespace iforge {

class InterfaceFunction {
public:
    // p_coeffs holds p_0 .. p_{Np-1}; p_0 must be real (the n = 0 case of
    // the Hermitian relation).  Negative-index coefficients are derived.
    InterfaceFunction(double gamma, std::vector<Complex> p_coeffs)
        : gamma_(gamma), p_(std::move(p_coeffs)) {
        if (!(gamma_ > 0.0)) throw ConfigError("interface: gamma must be positive");
        if (p_.empty()) throw ConfigError("interface: need at least p_0");
        if (std::abs(p_[0].imag()) > 1e-14 * std::max(1.0, std::abs(p_[0])))
            throw ConfigError("interface: p_0 must be real");
        p_[0] = Complex(p_[0].real(), 0.0);
    }

    static InterfaceFunction constant(double gamma, double p0) {
        return InterfaceFunction(gamma, {Complex(p0, 0.0)});
    }

    double gamma() const { return gamma_; }
    const std::vector<Complex>& coeffs() const { return p_; }
    int size() const { return static_cast<int>(p_.size()); }

    // p_n for any integer n, using the Hermitian relation for n < 0 and
    // zero beyond the stored range.
    Complex coeff(int n) const {
        if (n >= 0)
            return n < size() ? p_[n] : Complex(0.0, 0.0);
        const int k = -n;
        if (k >= size()) return Complex(0.0, 0.0);
        return std::conj(p_[k]) * std::pow(gamma_, 2.0 * k);
    }

    // Real value of h*p at angle theta on the boundary circle.
    double eval_weighted(double theta) const {
        const Complex w = std::polar(gamma_, theta);
        Complex acc = p_[0];
        Complex wn(1.0, 0.0);
        for (int n = 1; n < size(); ++n) {
            wn *= w;
            acc += 2.0 * (p_[n] * wn).real();  // p_n w^n + conj pair is real
        }
        return acc.real();
    }

    // Physical p(theta) = (h p)(theta) / h(rho0, theta).
    double eval_p(const ConformalMap& map, double theta) const {
        const double h = map.scale_factor(map.rho0(), theta);
        return eval_weighted(theta) / h;
    }

    // Smallest reconstructed boundary value; diagnostic only, the design
    // space does not enforce p > 0.
    double min_weighted(int samples = 512) const {
        double lo = eval_weighted(0.0);
        for (int j = 1; j < samples; ++j)
            lo = std::min(lo, eval_weighted(2.0 * kPi * j / samples));
        return lo;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        auto& arr = j["p"] = nlohmann::json::array();
        for (const Complex& c : p_) arr.push_back({c.real(), c.imag()});
        return j;
    }

    static InterfaceFunction from_json(const nlohmann::json& j, double gamma) {
        if (!j.contains("p")) throw ConfigError("interface file: expected field \"p\"");
        std::vector<Complex> coeffs;
        for (const auto& e : j.at("p")) {
            if (!e.is_array() || e.size() != 2)
                throw ConfigError("interface file: each coefficient must be [re, im]");
            coeffs.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        if (!coeffs.empty() && coeffs[0].imag() != 0.0)
            throw ConfigError("interface file: p_0 must have zero imaginary part");
        return InterfaceFunction(gamma, std::move(coeffs));
    }

    static InterfaceFunction load(const std::string& path, double gamma) {
        std::ifstream in(path);
        if (!in) throw ConfigError("interface file: cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw ConfigError("interface file: parse error in " + path + ": " + e.what());
        }
        return from_json(j, gamma);
    }

private:
    double gamma_;
    std::vector<Complex> p_;
};

struct InterfaceMatrices {
    MatrixXcd p_plus;   // Hankel:            p_plus(m,n)  = p_{m+n} gamma^{m+n}
    MatrixXcd p_minus;  // Hermitian Toeplitz: p_minus(m,n) = p_{m-n} gamma^{m-n}
};

inline InterfaceMatrices build_interface_matrices(const InterfaceFunction& ifn, int n_trunc) {
    if (n_trunc < 1) throw ConfigError("build_interface_matrices: n_trunc must be >= 1");
    const double g = ifn.gamma();
    InterfaceMatrices out;
    out.p_plus = MatrixXcd::Zero(n_trunc, n_trunc);
    out.p_minus = MatrixXcd::Zero(n_trunc, n_trunc);
    // fill band-by-band from the stored coefficients; absent p_k contribute
    // nothing, so gamma^k is never evaluated for large unused k
    for (int k = 0; k < ifn.size(); ++k) {
        const Complex pk = ifn.coeffs()[k];
        if (pk == Complex(0.0, 0.0)) continue;
        const Complex v = pk * std::pow(g, k);
        if (k >= 2) {  // P+ entries need m+n = k with m,n >= 1
            for (int m = std::max(1, k - n_trunc); m <= std::min(n_trunc, k - 1); ++m)
                out.p_plus(m - 1, k - m - 1) = v;
        }
        const Complex vbar = std::conj(v);
        for (int m = 1; m <= n_trunc; ++m) {
            if (m - k >= 1) out.p_minus(m - 1, m - k - 1) = v;                    // k-th subdiagonal (diagonal for k=0)
            if (k > 0 && m + k <= n_trunc) out.p_minus(m - 1, m + k - 1) = vbar;  // k-th superdiagonal
        }
    }
    return out;
}

}  // namespace iforge

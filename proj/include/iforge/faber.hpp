// Faber polynomial coefficients Q and Grunsky coefficients C of a conformal
// map, both obtained from the recursion
//     F_{m+1}(z) = z F_m(z) - m a_m - sum_{k=0}^{m} a_k F_{m-k}(z),
// applied once in monomial-coefficient space (Q) and once composed with Psi
// in Laurent-coefficient space (C).
#pragma once

#include <cmath>
#include <vector>

#include "iforge/common.hpp"
#include "iforge/conformal.hpp"

namespace iforge {

class FaberTable {
public:
    // Q is stored with its constant column: q(m, n) for 0 <= n <= m <= order.
    // The matrix used in tensor factorizations is the 1-based block
    // q(m, n), m, n >= 1, which is unit lower triangular.
    FaberTable(const ConformalMap& map, int order) : order_(order), gamma_(map.gamma()) {
        if (order < 1) throw ConfigError("faber table: order must be >= 1");
        build_q(map);
        build_c(map);
    }

    int order() const { return order_; }
    double gamma() const { return gamma_; }

    // q_{mn}: coefficient of z^n in F_m.  Zero for n > m.
    Complex q(int m, int n) const {
        if (m < 0 || m > order_ || n < 0) throw ConfigError("faber table: q index out of range");
        return n <= m ? q_[idx(m, n)] : Complex(0.0, 0.0);
    }

    // Unit-lower-triangular block (q_{mn})_{m,n=1..r}.
    MatrixXcd q_block(int r) const {
        if (r < 1 || r > order_) throw ConfigError("faber table: block size out of range");
        MatrixXcd Q = MatrixXcd::Zero(r, r);
        for (int m = 1; m <= r; ++m)
            for (int n = 1; n <= m; ++n) Q(m - 1, n - 1) = q_[idx(m, n)];
        return Q;
    }

    // Grunsky matrix (c_{mn})_{m,n=1..order}.
    const MatrixXcd& c() const { return c_; }

    // Horner evaluation of F_m(z) from the stored coefficients.  Accurate
    // for moderate m; for long Faber sums use faber_values below.
    Complex eval_faber(int m, Complex z) const {
        if (m < 0 || m > order_) throw ConfigError("eval_faber: m out of range");
        Complex acc = q_[idx(m, m)];
        for (int n = m - 1; n >= 0; --n) acc = acc * z + q_[idx(m, n)];
        return acc;
    }

    // Values F_0(z) .. F_order(z) by the value recursion.  This avoids the
    // monomial-coefficient cancellation that ruins Horner for large m.
    static std::vector<Complex> faber_values(const ConformalMap& map, Complex z, int order) {
        std::vector<Complex> F(order + 1);
        F[0] = Complex(1.0, 0.0);
        const int K = map.degree();
        for (int m = 0; m < order; ++m) {
            Complex g = z * F[m];
            if (m <= K) g -= double(m) * map.coeff(m);
            for (int k = 0; k <= std::min(m, K); ++k) g -= map.coeff(k) * F[m - k];
            F[m + 1] = g;
        }
        return F;
    }

private:
    int order_;
    double gamma_;
    std::vector<Complex> q_;  // packed rows: row m holds m+1 entries
    MatrixXcd c_;

    std::size_t idx(int m, int n) const { return static_cast<std::size_t>(m) * (m + 1) / 2 + n; }

    void build_q(const ConformalMap& map) {
        q_.assign(idx(order_, 0) + order_ + 1, Complex(0.0, 0.0));
        q_[idx(0, 0)] = Complex(1.0, 0.0);
        const int K = map.degree();
        for (int m = 0; m < order_; ++m) {
            // z F_m
            for (int n = 0; n <= m; ++n) q_[idx(m + 1, n + 1)] = q_[idx(m, n)];
            if (m <= K) q_[idx(m + 1, 0)] -= double(m) * map.coeff(m);
            for (int k = 0; k <= std::min(m, K); ++k) {
                const Complex ak = map.coeff(k);
                if (ak == Complex(0.0, 0.0)) continue;
                for (int n = 0; n <= m - k; ++n) q_[idx(m + 1, n)] -= ak * q_[idx(m - k, n)];
            }
        }
    }

    // Laurent recursion for f_m(w) = F_m(Psi(w)) = w^m + sum_n c_{mn} w^{-n}.
    // A finite map of degree K gives f_m exact support [-mK, m]; the full
    // support is kept, so the only rounding is in the arithmetic itself.
    // The recursion must reproduce zero coefficients for powers 0..m of
    // f_{m+1}; that cancellation is asserted and then enforced.
    void build_c(const ConformalMap& map) {
        const int K = std::max(map.degree(), 1);
        const int L = order_ * K + K + 2;               // deepest negative power kept
        const int W = L + order_ + 2;                   // powers -L .. order_+1
        auto at = [L](std::vector<Complex>& v, int p) -> Complex& { return v[p + L]; };

        std::vector<std::vector<Complex>> f(order_ + 1, std::vector<Complex>(W, Complex(0.0, 0.0)));
        at(f[0], 0) = Complex(1.0, 0.0);
        c_ = MatrixXcd::Zero(order_, order_);

        std::vector<Complex> g(W);
        for (int m = 0; m < order_; ++m) {
            std::fill(g.begin(), g.end(), Complex(0.0, 0.0));
            // Psi(w) f_m(w): shift by +1 and by -k for each stored a_k
            const std::vector<Complex>& fm = f[m];
            for (int p = -L; p <= m; ++p) {
                const Complex v = fm[p + L];
                if (v == Complex(0.0, 0.0)) continue;
                if (p + 1 <= order_ + 1) g[p + 1 + L] += v;
                for (int k = 0; k <= map.degree(); ++k) {
                    const Complex ak = map.coeff(k);
                    if (ak != Complex(0.0, 0.0) && p - k >= -L) g[p - k + L] += ak * v;
                }
            }
            if (m <= map.degree()) g[0 + L] -= double(m) * map.coeff(m);
            for (int k = 0; k <= std::min(m, map.degree()); ++k) {
                const Complex ak = map.coeff(k);
                if (ak == Complex(0.0, 0.0)) continue;
                const std::vector<Complex>& fk = f[m - k];
                for (int p = -L; p <= m - k; ++p) g[p + L] -= ak * fk[p + L];
            }
            // powers 1..m (and the constant) must cancel; w^{m+1} has coefficient 1
            double junk = 0.0, scale = 1.0;
            for (int p = -L; p <= m; ++p) scale = std::max(scale, std::abs(g[p + L]));
            for (int p = 0; p <= m; ++p) junk = std::max(junk, std::abs(g[p + L]));
            if (junk > 1e-12 * scale)
                throw NumericalError("grunsky recursion: positive-power cancellation failed");
            for (int p = 0; p <= m; ++p) g[p + L] = Complex(0.0, 0.0);
            g[m + 1 + L] = Complex(1.0, 0.0);
            f[m + 1] = g;
            for (int n = 1; n <= order_; ++n) c_(m, n - 1) = g[-n + L];
        }
    }
};

}  // namespace iforge

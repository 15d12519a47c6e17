// Test-only fixtures and independent oracles.  Nothing here may reuse the
// library's Laurent-recursion path for Grunsky coefficients: the oracle
// samples F_m(Psi(w)) on a circle and extracts Fourier coefficients.
#pragma once

#include <complex>
#include <vector>

#include "iforge/conformal.hpp"
#include "iforge/faber.hpp"

namespace testsupport {

using iforge::Complex;
using iforge::ConformalMap;

inline ConformalMap ex1_map() {
    return ConformalMap(1.0, {Complex(0, 0), Complex(0.25, 0), Complex(0.125, 0), Complex(0.1, 0)});
}

inline ConformalMap ex2_map() {
    return ConformalMap(1.0, {Complex(0, 0), Complex(0.1, 0), Complex(0.25, 0), Complex(-0.05, 0),
                              Complex(0.05, 0), Complex(-0.04, 0), Complex(0.02, 0)});
}

inline ConformalMap ellipse_map(double a1 = 0.5) {
    return ConformalMap(1.0, {Complex(0, 0), Complex(a1, 0)});
}

// in-place radix-2 FFT, forward sign convention X_k = sum_j x_j e^{-2pi i jk/M}
inline void fft(std::vector<Complex>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * iforge::kPi / static_cast<double>(len);
        const Complex wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const Complex u = a[i + k], v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Grunsky coefficients by Fourier extraction of F_m(Psi(w)) sampled on
// |w| = r_factor * gamma.  F_m values come from the pointwise value
// recursion, so neither the Laurent-product code nor the monomial Horner
// path is involved.
inline Eigen::MatrixXcd grunsky_fft_oracle(const ConformalMap& map, int order,
                                           double r_factor = 1.05, int samples = 4096) {
    const double R = r_factor * map.gamma();
    std::vector<Complex> z(samples);
    for (int j = 0; j < samples; ++j) z[j] = map.eval(std::polar(R, 2.0 * iforge::kPi * j / samples));

    // F_m at every sample, by the value recursion
    std::vector<std::vector<Complex>> F(order + 1, std::vector<Complex>(samples));
    for (int j = 0; j < samples; ++j) F[0][j] = Complex(1.0, 0.0);
    const int K = map.degree();
    for (int m = 0; m < order; ++m) {
        for (int j = 0; j < samples; ++j) {
            Complex g = z[j] * F[m][j];
            if (m <= K) g -= double(m) * map.coeff(m);
            for (int k = 0; k <= std::min(m, K); ++k) g -= map.coeff(k) * F[m - k][j];
            F[m + 1][j] = g;
        }
    }

    Eigen::MatrixXcd C(order, order);
    std::vector<Complex> buf(samples);
    for (int m = 1; m <= order; ++m) {
        buf = F[m];
        fft(buf);
        for (int n = 1; n <= order; ++n) {
            const Complex coeff = buf[(samples - n) % samples] / double(samples);
            C(m - 1, n - 1) = coeff * std::pow(R, n);
        }
    }
    return C;
}

}  // namespace testsupport

// Assembly of the truncated coefficient system
//   A1 = (sc-sm) g^N conj(P+) g^N + (sc-sm) C g^-N P- g^N + sc sm C N
//   A2 = (sc-sm) g^N conj(P-) g^N + (sc-sm) C g^-N P+ g^N - sc sm g^2N N
//   B1 = [(sc-sm) I + 2 sm R] g^-N P+ g^N + 2 sm R g^-2N conj(C) g^-N conj(P-) g^N
//   B2 = [(sc-sm) I + 2 sm R] g^-N P- g^N + 2 sm R g^-2N conj(C) g^-N conj(P+) g^N + sc sm N
// with R = (I - g^-2N conj(C) g^-2N C)^{-1}; the Faber polarization tensors
//   F1 = 4pi (A1 - A2 conj(B2)^{-1} conj(B1)) (B2 - B1 conj(B2)^{-1} conj(B1))^{-1} N
//   F2 = 4pi (conj(A2) - conj(A1) conj(B2)^{-1} conj(B1)) (same inverse) N;
// the polarization tensors N1 = Q^{-1} F1 Q^{-T}, N2 = conj(Q^{-1}) F2 Q^{-T};
// and the exterior/interior coefficient solves.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "iforge/common.hpp"
#include "iforge/conformal.hpp"
#include "iforge/faber.hpp"
#include "iforge/interface.hpp"

namespace iforge {

struct MaterialParams {
    double sigma_c;  // core conductivity, >= 0, != sigma_m
    double sigma_m;  // background conductivity, > 0

    MaterialParams(double sc, double sm) : sigma_c(sc), sigma_m(sm) {
        if (!(sigma_m > 0.0)) throw ConfigError("material: sigma_m must be positive");
        if (!(sigma_c >= 0.0) || !std::isfinite(sigma_c))
            throw ConfigError("material: sigma_c must be finite and nonnegative");
        if (sigma_c == sigma_m) throw ConfigError("material: sigma_c must differ from sigma_m");
    }

    double lambda() const { return (sigma_c + sigma_m) / (2.0 * (sigma_c - sigma_m)); }
    double tau() const { return sigma_c * sigma_m / (sigma_c - sigma_m); }
    double contrast() const { return sigma_c - sigma_m; }
};

inline VectorXd gamma_pows(double gamma, int n, double exponent_scale) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = std::pow(gamma, exponent_scale * (i + 1));
    return v;
}

struct SystemMatrices {
    MatrixXcd a1, a2, b1, b2;
    MatrixXcd resolvent;  // R, reused by the coefficient solves
    double cond_resolvent = 0.0;
    int n_trunc = 0;
    double gamma = 0.0;
};

// Map- and material-dependent, interface-independent factors.  Building
// these once makes repeated assembly (the design loop) cheap: the remaining
// interface-dependent products all act on banded matrices.
struct MapOperators {
    const ConformalMap* map = nullptr;
    const FaberTable* faber = nullptr;
    MatrixXcd resolvent;   // (I - g^-2N conj(C) g^-2N C)^{-1}
    MatrixXcd r_cbar;      // resolvent * g^-2N conj(C)
    double cond_resolvent = 0.0;
    VectorXd g2N, gm2N;
};

inline MapOperators make_map_operators(const ConformalMap& map, const FaberTable& faber) {
    const int N = faber.order();
    MapOperators ops;
    ops.map = &map;
    ops.faber = &faber;
    ops.g2N = gamma_pows(map.gamma(), N, 2.0);
    ops.gm2N = gamma_pows(map.gamma(), N, -2.0);

    MatrixXcd Cb = faber.c().conjugate();
    Cb.array().colwise() *= ops.gm2N.array();  // g^-2N conj(C)
    MatrixXcd Cs = faber.c();
    Cs.array().colwise() *= ops.gm2N.array();  // g^-2N C
    MatrixXcd M = MatrixXcd::Identity(N, N) - Cb * Cs;
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    const double rc = lu.rcond();
    ops.cond_resolvent = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(ops.cond_resolvent < 1e12))
        throw NumericalError("assemble_system: resolvent (I - g^-2N conj(C) g^-2N C) is near singular");
    ops.resolvent = lu.solve(MatrixXcd::Identity(N, N));
    ops.r_cbar = ops.resolvent * Cb;
    return ops;
}

namespace detail {

// out += scale * M * (g^-N P- g^N); that scaled Toeplitz has the constant
// value p_{m-n} on each diagonal, so the product is a sum of column shifts.
// conj_p multiplies by the conjugated factor g^-N conj(P-) g^N instead.
inline void add_mul_toeplitz(MatrixXcd& out, const MatrixXcd& M, const InterfaceFunction& ifn,
                             bool conj_p, double scale) {
    const int N = static_cast<int>(M.rows());
    for (int d = -(ifn.size() - 1); d <= ifn.size() - 1; ++d) {
        Complex pd = ifn.coeff(d);
        if (conj_p) pd = std::conj(pd);
        if (pd == Complex(0.0, 0.0)) continue;
        pd *= scale;
        // target(:, j) += p_d * M(:, j + d)
        const int j_lo = std::max(0, -d), j_hi = std::min(N, N - d);
        if (j_hi > j_lo)
            out.middleCols(j_lo, j_hi - j_lo) += pd * M.middleCols(j_lo + d, j_hi - j_lo);
    }
}

// out += scale * M * (g^-N P+ g^N); entries p_{m+n} g^{2n} live in the
// m+n <= Np-1 corner, so only the first few columns receive anything.
inline void add_mul_hankel(MatrixXcd& out, const MatrixXcd& M, const InterfaceFunction& ifn,
                           const VectorXd& g2N, bool conj_p, double scale) {
    const int N = static_cast<int>(M.rows());
    const int np = ifn.size();
    for (int j = 1; j <= std::min(N, np - 2); ++j) {       // 1-based column
        for (int k = 1; k + j <= np - 1 && k <= N; ++k) {  // 1-based inner index
            Complex pk = ifn.coeffs()[k + j];
            if (conj_p) pk = std::conj(pk);
            if (pk == Complex(0.0, 0.0)) continue;
            out.col(j - 1) += (scale * pk * g2N[j - 1]) * M.col(k - 1);
        }
    }
}

}  // namespace detail

// Fast assembly: every interface-dependent factor is banded, so the heavy
// products reduce to column shifts of the precomputed dense operators.
inline SystemMatrices assemble_system(const MapOperators& ops, const InterfaceFunction& ifn,
                                      const MaterialParams& mat) {
    const FaberTable& faber = *ops.faber;
    const int N = faber.order();
    if (std::abs(ifn.gamma() - ops.map->gamma()) > 1e-14 * ops.map->gamma())
        throw ConfigError("assemble_system: interface and map disagree on gamma");
    const double g = ops.map->gamma();
    const MatrixXcd& C = faber.c();
    const int np = ifn.size();

    SystemMatrices sys;
    sys.n_trunc = N;
    sys.gamma = g;
    sys.resolvent = ops.resolvent;
    sys.cond_resolvent = ops.cond_resolvent;

    const double ds = mat.contrast();
    const double sm2 = 2.0 * mat.sigma_m;
    const double ss = mat.sigma_c * mat.sigma_m;

    // A1 = ds g^N conj(P+) g^N + ds C (g^-N P- g^N) + ss C N
    sys.a1 = MatrixXcd::Zero(N, N);
    for (int m = 1; m <= std::min(N, np - 2); ++m)  // corner: conj(p_{m+n}) g^{2(m+n)}
        for (int n = 1; m + n < np && n <= N; ++n)
            sys.a1(m - 1, n - 1) = ds * std::conj(ifn.coeffs()[m + n]) * std::pow(g, 2.0 * (m + n));
    detail::add_mul_toeplitz(sys.a1, C, ifn, false, ds);
    for (int n = 0; n < N; ++n) sys.a1.col(n) += ss * double(n + 1) * C.col(n);

    // A2 = ds g^N conj(P-) g^N + ds C (g^-N P+ g^N) - ss g^2N N
    sys.a2 = MatrixXcd::Zero(N, N);
    for (int d = -(np - 1); d <= np - 1; ++d) {  // band: conj(p_{m-n}) g^{2m}
        const Complex pd = std::conj(ifn.coeff(d));
        if (pd == Complex(0.0, 0.0)) continue;
        for (int m = std::max(1, 1 + d); m <= std::min(N, N + d); ++m)
            sys.a2(m - 1, m - d - 1) = ds * pd * ops.g2N[m - 1];
    }
    detail::add_mul_hankel(sys.a2, C, ifn, ops.g2N, false, ds);
    for (int n = 0; n < N; ++n) sys.a2(n, n) -= ss * ops.g2N[n] * double(n + 1);

    // B1 = [ds I + 2 sm R](g^-N P+ g^N) + 2 sm R g^-2N conj(C) (g^-N conj(P-) g^N)
    // B2 = [ds I + 2 sm R](g^-N P- g^N) + 2 sm R g^-2N conj(C) (g^-N conj(P+) g^N) + ss N
    sys.b1 = MatrixXcd::Zero(N, N);
    sys.b2 = MatrixXcd::Zero(N, N);
    for (int m = 1; m <= std::min(N, np - 2); ++m)  // ds * (g^-N P+ g^N): p_{m+n} g^{2n}
        for (int n = 1; m + n < np && n <= N; ++n)
            sys.b1(m - 1, n - 1) = ds * ifn.coeffs()[m + n] * ops.g2N[n - 1];
    detail::add_mul_hankel(sys.b1, ops.resolvent, ifn, ops.g2N, false, sm2);
    detail::add_mul_toeplitz(sys.b1, ops.r_cbar, ifn, true, sm2);

    for (int d = -(np - 1); d <= np - 1; ++d) {  // ds * (g^-N P- g^N): constant bands p_d
        const Complex pd = ifn.coeff(d);
        if (pd == Complex(0.0, 0.0)) continue;
        for (int m = std::max(1, 1 + d); m <= std::min(N, N + d); ++m)
            sys.b2(m - 1, m - d - 1) = ds * pd;
    }
    detail::add_mul_toeplitz(sys.b2, ops.resolvent, ifn, false, sm2);
    detail::add_mul_hankel(sys.b2, ops.r_cbar, ifn, ops.g2N, true, sm2);
    for (int n = 0; n < N; ++n) sys.b2(n, n) += ss * double(n + 1);
    return sys;
}

// Reference assembly, a direct transcription of the printed matrix products
// over the fully formed P+ / P- matrices.  The fast path above must agree
// with this to rounding; the test suite checks that.
inline SystemMatrices assemble_system(const ConformalMap& map, const FaberTable& faber,
                                      const InterfaceMatrices& ifm, const MaterialParams& mat) {
    const int N = faber.order();
    if (ifm.p_plus.rows() != N || ifm.p_minus.rows() != N)
        throw ConfigError("assemble_system: truncation mismatch between Faber table and interface matrices");
    const double g = map.gamma();
    const MatrixXcd& C = faber.c();

    const VectorXd gN = gamma_pows(g, N, 1.0);
    const VectorXd gmN = gamma_pows(g, N, -1.0);
    const VectorXd gm2N = gamma_pows(g, N, -2.0);
    const VectorXd g2N = gamma_pows(g, N, 2.0);
    VectorXd ndiag(N);
    for (int i = 0; i < N; ++i) ndiag[i] = i + 1;

    const double ds = mat.contrast();
    const double ss = mat.sigma_c * mat.sigma_m;

    auto rowcol = [](const VectorXd& l, const MatrixXcd& M, const VectorXd& r) {
        MatrixXcd out = M;
        out.array().colwise() *= l.array();
        out.array().rowwise() *= r.transpose().array();
        return out;
    };
    auto rowscale = [](const VectorXd& l, const MatrixXcd& M) {
        MatrixXcd out = M;
        out.array().colwise() *= l.array();
        return out;
    };

    const MatrixXcd Pp_s = rowcol(gmN, ifm.p_plus, gN);
    const MatrixXcd Pm_s = rowcol(gmN, ifm.p_minus, gN);
    const MatrixXcd Ppc_s = rowcol(gmN, ifm.p_plus.conjugate(), gN);
    const MatrixXcd Pmc_s = rowcol(gmN, ifm.p_minus.conjugate(), gN);

    SystemMatrices sys;
    sys.n_trunc = N;
    sys.gamma = g;

    MatrixXcd M = MatrixXcd::Identity(N, N) - rowscale(gm2N, C.conjugate()) * rowscale(gm2N, C);
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    const double rc = lu.rcond();
    sys.cond_resolvent = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(sys.cond_resolvent < 1e12))
        throw NumericalError("assemble_system: resolvent (I - g^-2N conj(C) g^-2N C) is near singular");
    sys.resolvent = lu.solve(MatrixXcd::Identity(N, N));

    MatrixXcd colN = C;
    colN.array().rowwise() *= ndiag.transpose().array();
    sys.a1 = ds * rowcol(gN, ifm.p_plus.conjugate(), gN) + ds * (C * Pm_s) + ss * colN;
    sys.a2 = ds * rowcol(gN, ifm.p_minus.conjugate(), gN) + ds * (C * Pp_s);
    sys.a2.diagonal() -= (ss * g2N.cwiseProduct(ndiag)).cast<Complex>();

    const MatrixXcd K1 = ds * MatrixXcd::Identity(N, N) + 2.0 * mat.sigma_m * sys.resolvent;
    const MatrixXcd K2 = 2.0 * mat.sigma_m * (sys.resolvent * rowscale(gm2N, C.conjugate()));
    sys.b1 = K1 * Pp_s + K2 * Pmc_s;
    sys.b2 = K1 * Pm_s + K2 * Ppc_s;
    sys.b2.diagonal() += (ss * ndiag).cast<Complex>();
    return sys;
}

struct FptPair {
    MatrixXcd f1, f2;  // leading rows/blocks, see the producing call
    double cond_b2 = 0.0;
    double cond_schur = 0.0;
};

namespace detail {

// Shared core: first n_rows rows of both FPT matrices, all n_trunc columns.
inline FptPair fpt_rows(const SystemMatrices& sys, int n_rows) {
    const int N = sys.n_trunc;
    Eigen::PartialPivLU<MatrixXcd> lu_b2(sys.b2.conjugate());
    double rc = lu_b2.rcond();
    FptPair out;
    out.cond_b2 = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(out.cond_b2 < 1e12)) throw NumericalError("compute_fpt: B2 inversion failed (near singular)");
    const MatrixXcd X = lu_b2.solve(sys.b1.conjugate());

    const MatrixXcd S = sys.b2 - sys.b1 * X;
    Eigen::PartialPivLU<MatrixXcd> lu_st(S.transpose());
    rc = lu_st.rcond();
    out.cond_schur = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(out.cond_schur < 1e12))
        throw NumericalError("compute_fpt: Schur complement inversion failed (near singular)");

    const MatrixXcd W1 = (sys.a1.topRows(n_rows) - sys.a2.topRows(n_rows) * X);
    const MatrixXcd W2 = (sys.a2.conjugate().topRows(n_rows) - sys.a1.conjugate().topRows(n_rows) * X);
    out.f1 = lu_st.solve(W1.transpose()).transpose();
    out.f2 = lu_st.solve(W2.transpose()).transpose();
    for (int n = 0; n < N; ++n) {
        out.f1.col(n) *= 4.0 * kPi * (n + 1);
        out.f2.col(n) *= 4.0 * kPi * (n + 1);
    }
    return out;
}

}  // namespace detail

// Top-left n_report x n_report blocks of F1, F2.  Throws, naming the
// offending inversion, when a condition estimate exceeds 1e12.
inline FptPair compute_fpt(const SystemMatrices& sys, int n_report) {
    if (n_report < 1 || n_report > sys.n_trunc) throw ConfigError("compute_fpt: n_report out of range");
    FptPair rows = detail::fpt_rows(sys, n_report);
    rows.f1 = rows.f1.leftCols(n_report).eval();
    rows.f2 = rows.f2.leftCols(n_report).eval();
    return rows;
}

struct TensorSet {
    MatrixXcd f1, f2;  // FPT leading blocks
    MatrixXcd n1, n2;  // GPT leading blocks
    double cond_b2 = 0.0;
    double cond_schur = 0.0;
    int n_trunc = 0;

    nlohmann::json to_json() const {
        auto dump = [](const MatrixXcd& M) {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index i = 0; i < M.rows(); ++i) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index j = 0; j < M.cols(); ++j)
                    row.push_back({M(i, j).real(), M(i, j).imag()});
                rows.push_back(std::move(row));
            }
            return rows;
        };
        nlohmann::json j;
        j["N1"] = dump(n1);
        j["N2"] = dump(n2);
        j["F1"] = dump(f1);
        j["F2"] = dump(f2);
        j["cond_B2"] = cond_b2;
        j["cond_schur"] = cond_schur;
        j["n_trunc"] = n_trunc;
        return j;
    }
};

// GPT blocks from FPT blocks.  Q is unit lower triangular, so the leading
// r x r block of Q^{-1} F Q^{-T} involves only the leading r x r block of
// Q; both inversions are triangular solves, never explicit inverses.
inline void compute_gpt(const FptPair& fpt, const FaberTable& faber, int n_report,
                        MatrixXcd& n1, MatrixXcd& n2) {
    if (fpt.f1.rows() < n_report || fpt.f1.cols() < n_report)
        throw ConfigError("compute_gpt: FPT block smaller than n_report");
    const MatrixXcd Q = faber.q_block(n_report);
    const auto Qt = Q.triangularView<Eigen::Lower>();
    const MatrixXcd F1 = fpt.f1.topLeftCorner(n_report, n_report);
    const MatrixXcd F2 = fpt.f2.topLeftCorner(n_report, n_report);

    // right-multiplying by Q^{-T} is a second solve against Q itself:
    // (Z Q^{-T})^T = Q^{-1} Z^T
    MatrixXcd Z1 = Qt.solve(F1);
    n1 = Qt.solve(Z1.transpose()).transpose();
    MatrixXcd Z2 = Qt.solve(F2.conjugate()).conjugate();
    n2 = Qt.solve(Z2.transpose()).transpose();
}

inline TensorSet compute_tensors(const SystemMatrices& sys, const FaberTable& faber, int n_report) {
    FptPair fpt = compute_fpt(sys, n_report);
    TensorSet t;
    t.f1 = fpt.f1;
    t.f2 = fpt.f2;
    t.cond_b2 = fpt.cond_b2;
    t.cond_schur = fpt.cond_schur;
    t.n_trunc = sys.n_trunc;
    compute_gpt(fpt, faber, n_report, t.n1, t.n2);
    return t;
}

// Closed-form GPTs of a radius-gamma disk with constant weighted interface
// coefficient p0 (physical parameter p = p0 / gamma):
//   N1 = 0,  N2_{nn} = 4 pi n gamma^{2n} ((sc-sm) p0 - sc sm n) / ((sc+sm) p0 + sc sm n).
// Obtained by solving the per-mode boundary equations of the disk directly;
// the p0 -> inf limit recovers the classical perfect-interface value
// 4 pi n gamma^{2n} (sc-sm)/(sc+sm).
inline void disk_gpt_closed_form(const MaterialParams& mat, double gamma, double p0, int n_report,
                                 MatrixXcd& n1, MatrixXcd& n2) {
    n1 = MatrixXcd::Zero(n_report, n_report);
    n2 = MatrixXcd::Zero(n_report, n_report);
    for (int n = 1; n <= n_report; ++n) {
        const double num = mat.contrast() * p0 - mat.sigma_c * mat.sigma_m * n;
        const double den = (mat.sigma_c + mat.sigma_m) * p0 + mat.sigma_c * mat.sigma_m * n;
        if (std::abs(den) < 1e-12 * (std::abs(p0) + n))
            throw NumericalError("disk_gpt_closed_form: pole, (sc+sm) p0 + sc sm n vanishes");
        n2(n - 1, n - 1) = 4.0 * kPi * n * std::pow(gamma, 2.0 * n) * num / den;
    }
}

// Real 2x2 polarization tensor from the first-order FPTs.
inline Eigen::Matrix2d pt_matrix(const TensorSet& t) {
    const Complex f1 = t.f1(0, 0), f2 = t.f2(0, 0);
    Eigen::Matrix2d M;
    M << 0.5 * (f1 + f2).real(), 0.5 * (f1 + f2).imag(),
         0.5 * (f1 - f2).imag(), 0.5 * (f2 - f1).real();
    return M;
}

enum class SolveMode { series, bvp };

struct SolutionCoefficients {
    VectorXcd alpha;          // diagonal incident coefficients alpha_m
    MatrixXcd s;              // exterior w^{-n} coefficients, row m
    MatrixXcd beta;           // interior Faber coefficients, row m
    VectorXd interior_const;  // interior additive constant per row (bvp mode)
    SolveMode mode = SolveMode::series;
};

// Series solve: s from the FPT factorization,
//   s_{mn} = -alpha_m F1_{mn}/(4 pi n) - conj(alpha_m) F2_{mn}/(4 pi n),
// beta from
//   beta = (sm/sc) alpha - (sm/sc)(conj(s) + s g^-2N conj(C)) conj(R) g^-2N.
inline SolutionCoefficients solve_coefficients(const SystemMatrices& sys, const FaberTable& faber,
                                               const MaterialParams& mat, const VectorXcd& alpha) {
    const int N = sys.n_trunc;
    if (alpha.size() != N) throw ConfigError("solve_coefficients: alpha size mismatch");
    SolutionCoefficients sol;
    sol.alpha = alpha;
    sol.mode = SolveMode::series;
    sol.s = MatrixXcd::Zero(N, N);
    sol.beta = MatrixXcd::Zero(N, N);
    sol.interior_const = VectorXd::Zero(N);

    int top = 0;
    for (int m = 0; m < N; ++m)
        if (alpha[m] != Complex(0.0, 0.0)) top = m + 1;
    if (top == 0) return sol;  // zero incident field

    const FptPair fpt = detail::fpt_rows(sys, top);
    for (int m = 0; m < top; ++m) {
        if (alpha[m] == Complex(0.0, 0.0)) continue;
        for (int n = 0; n < N; ++n) {
            const double w = 4.0 * kPi * (n + 1);
            sol.s(m, n) = -alpha[m] * fpt.f1(m, n) / w - std::conj(alpha[m]) * fpt.f2(m, n) / w;
        }
    }

    const VectorXd gm2N = gamma_pows(sys.gamma, N, -2.0);
    MatrixXcd Cg = faber.c().conjugate();
    Cg.array().colwise() *= gm2N.array();  // g^-2N conj(C)
    const double r = mat.sigma_m / mat.sigma_c;
    const MatrixXcd R2 = sys.resolvent.conjugate();  // (I - g^-2N C g^-2N conj(C))^{-1}
    MatrixXcd corr = (sol.s.conjugate() + sol.s * Cg) * R2;
    corr.array().rowwise() *= gm2N.transpose().array();
    sol.beta = -r * corr;
    sol.beta.diagonal() += r * alpha;
    return sol;
}

// Boundary-value solve: the same truncated expansions plus, per incident
// order, the interior additive constant as an extra unknown and the mean
// (mode-0) jump equation as the matching extra condition.  The result then
// satisfies both interface conditions pointwise to truncation accuracy.
// For a constant interface function the extra constant vanishes and this
// reproduces the series solve.
inline SolutionCoefficients solve_coefficients_bvp(const ConformalMap& map, const FaberTable& faber,
                                                   const InterfaceFunction& ifn,
                                                   const MaterialParams& mat, const VectorXcd& alpha) {
    const int N = faber.order();
    if (alpha.size() != N) throw ConfigError("solve_coefficients_bvp: alpha size mismatch");
    const double g = map.gamma();
    const MatrixXcd& C = faber.c();
    const double sc = mat.sigma_c, sm = mat.sigma_m;

    SolutionCoefficients sol;
    sol.alpha = alpha;
    sol.mode = SolveMode::bvp;
    sol.s = MatrixXcd::Zero(N, N);
    sol.beta = MatrixXcd::Zero(N, N);
    sol.interior_const = VectorXd::Zero(N);

    bool any = false;
    for (int m = 0; m < N; ++m) any = any || alpha[m] != Complex(0.0, 0.0);
    if (!any) return sol;

    const VectorXd gm2 = gamma_pows(g, N, -2.0);  // gamma^{-2n}
    const VectorXd gp2 = gamma_pows(g, N, 2.0);   // gamma^{+2n}
    const int np = ifn.size();
    auto pL = [&](int k) { return ifn.coeff(k); };  // Laurent coefficient of h*p

    // unknown layout: [beta0, Re b_1, Im b_1, ..., Re s_1, Im s_1, ...]
    const int nun = 1 + 4 * N;
    auto col_b = [](int n1b) { return 1 + 2 * (n1b - 1); };
    auto col_s = [N](int n1b) { return 1 + 2 * N + 2 * (n1b - 1); };

    MatrixXd A = MatrixXd::Zero(nun, nun);

    // contribution helpers for one complex equation occupying rows (r, r+1);
    // the mode-0 jump row passes r = last row and only keeps the real part
    auto add_lin = [&](int r, bool imag_row, Complex c, int col) {
        A(r, col) += c.real();
        A(r, col + 1) -= c.imag();
        if (imag_row) {
            A(r + 1, col) += c.imag();
            A(r + 1, col + 1) += c.real();
        }
    };
    auto add_conj = [&](int r, bool imag_row, Complex c, int col) {
        A(r, col) += c.real();
        A(r, col + 1) += c.imag();
        if (imag_row) {
            A(r + 1, col) += c.imag();
            A(r + 1, col + 1) -= c.real();
        }
    };
    auto add_beta0 = [&](int r, bool imag_row, Complex c) {
        A(r, 0) += c.real();
        if (imag_row) A(r + 1, 0) += c.imag();
    };

    // ---- matrix (independent of the incident row) ----
    // flux rows, complex equation n = 1..N at rows 2(n-1), 2(n-1)+1:
    //   -sm g^{-2n} conj(s_n) - sc b_n + sc g^{-2n} sum_l conj(c_{ln} b_l) = rhs
    for (int n = 1; n <= N; ++n) {
        const int r = 2 * (n - 1);
        const double gn = gm2[n - 1];
        add_conj(r, true, Complex(-sm * gn, 0.0), col_s(n));
        add_lin(r, true, Complex(-sc, 0.0), col_b(n));
        for (int l = 1; l <= N; ++l) {
            const Complex cl = C(l - 1, n - 1);
            if (cl != Complex(0.0, 0.0)) add_conj(r, true, sc * gn * std::conj(cl), col_b(l));
        }
    }
    // jump rows: sum_l p_{n-l} J_l + p_n J_0 + sum_l p_{n+l} conj(J_l) g^{2l} - sm D_n = rhs,
    // where J_l = (x_l + conj(y_l) g^{-2l})/2 involves b, s and C products.
    // Unknown-dependent parts of J_l:
    //   J_l:       -b_l/2  + g^{-2l}/2 (conj(s_l) - sum_j conj(c_{jl} b_j))
    //   conj(J_l) g^{2l}:  -g^{2l} conj(b_l)/2 + (s_l - sum_j c_{jl} b_j)/2
    // and of D_n: -n g^{-2n} conj(s_n)/2.
    for (int n = 0; n <= N; ++n) {
        const int r = n >= 1 ? 2 * N + 2 * (n - 1) : 4 * N;
        const bool im = n >= 1;
        const Complex pn = pL(n);
        if (pn != Complex(0.0, 0.0)) add_beta0(r, im, -pn);
        for (int l = 1; l <= N; ++l) {
            if (std::abs(n - l) < np) {
                const Complex q1 = pL(n - l);
                if (q1 != Complex(0.0, 0.0)) {
                    add_lin(r, im, -0.5 * q1, col_b(l));
                    add_conj(r, im, 0.5 * q1 * gm2[l - 1], col_s(l));
                    for (int j = 1; j <= N; ++j) {
                        const Complex cj = C(j - 1, l - 1);
                        if (cj != Complex(0.0, 0.0))
                            add_conj(r, im, -0.5 * q1 * gm2[l - 1] * std::conj(cj), col_b(j));
                    }
                }
            }
            if (n + l < np) {
                const Complex q2 = pL(n + l);
                if (q2 != Complex(0.0, 0.0)) {
                    add_conj(r, im, -0.5 * q2 * gp2[l - 1], col_b(l));
                    add_lin(r, im, 0.5 * q2, col_s(l));
                    for (int j = 1; j <= N; ++j) {
                        const Complex cj = C(j - 1, l - 1);
                        if (cj != Complex(0.0, 0.0)) add_lin(r, im, -0.5 * q2 * cj, col_b(j));
                    }
                }
            }
        }
        if (n >= 1) add_conj(r, im, Complex(0.5 * sm * n * gm2[n - 1], 0.0), col_s(n));
    }

    Eigen::PartialPivLU<MatrixXd> lu(A);
    if (lu.rcond() < 1e-14)
        throw NumericalError("solve_coefficients_bvp: boundary system is near singular");

    // ---- one right-hand side per active incident order ----
    for (int m1 = 1; m1 <= N; ++m1) {
        const Complex al = alpha[m1 - 1];
        if (al == Complex(0.0, 0.0)) continue;
        VectorXd rhs = VectorXd::Zero(nun);
        auto put = [&](int r, bool im, Complex v) {  // equation constant `v`, move across
            rhs(r) -= v.real();
            if (im) rhs(r + 1) -= v.imag();
        };
        // flux rows: constant part  sm alpha delta_{nm} - sm g^{-2n} conj(alpha c_{mn})
        for (int n = 1; n <= N; ++n) {
            const int r = 2 * (n - 1);
            Complex v(0.0, 0.0);
            if (n == m1) v += sm * al;
            v -= sm * gm2[n - 1] * std::conj(al * C(m1 - 1, n - 1));
            put(r, true, v);
        }
        // jump rows: constant parts of J_l, conj(J_l) g^{2l} and D_n
        for (int n = 0; n <= N; ++n) {
            const int r = n >= 1 ? 2 * N + 2 * (n - 1) : 4 * N;
            const bool im = n >= 1;
            Complex v(0.0, 0.0);
            for (int l = 1; l <= N; ++l) {
                Complex Jl_const = 0.5 * gm2[l - 1] * std::conj(al * C(m1 - 1, l - 1));
                if (l == m1) Jl_const += 0.5 * al;
                if (std::abs(n - l) < np) {
                    const Complex q1 = pL(n - l);
                    if (q1 != Complex(0.0, 0.0)) v += q1 * Jl_const;
                }
                if (n + l < np) {
                    const Complex q2 = pL(n + l);
                    if (q2 != Complex(0.0, 0.0)) v += q2 * std::conj(Jl_const) * gp2[l - 1];
                }
            }
            if (n >= 1) {
                Complex Dn = 0.5 * n * (n == m1 ? al : Complex(0.0, 0.0));
                Dn -= 0.5 * n * gm2[n - 1] * std::conj(al * C(m1 - 1, n - 1));
                v -= sm * Dn;
            }
            put(r, im, v);
        }

        const VectorXd x = lu.solve(rhs);
        sol.interior_const[m1 - 1] = x[0];
        for (int n = 1; n <= N; ++n) {
            sol.beta(m1 - 1, n - 1) = Complex(x[col_b(n)], x[col_b(n) + 1]);
            sol.s(m1 - 1, n - 1) = Complex(x[col_s(n)], x[col_s(n) + 1]);
        }
    }
    return sol;
}

// Residual of  alpha A1 + conj(alpha A2) + conj(s B1) + s B2 = 0, relative
// to |alpha| |A1|.
inline double system_residual(const SystemMatrices& sys, const VectorXcd& alpha, const MatrixXcd& s) {
    MatrixXcd R = alpha.asDiagonal() * sys.a1 + (alpha.conjugate()).asDiagonal() * sys.a2.conjugate() +
                  s.conjugate() * sys.b1.conjugate() + s * sys.b2;
    const double scale = alpha.norm() * sys.a1.norm();
    return R.norm() / (scale > 0.0 ? scale : 1.0);
}

// Residual of the flux-condition relation
//   (alpha C + s) g^-2N = conj(alpha) - (sc/sm) conj(beta) + (sc/sm) beta C g^-2N.
inline double flux_relation_residual(const SystemMatrices& sys, const FaberTable& faber,
                                     const MaterialParams& mat, const SolutionCoefficients& sol) {
    const int N = sys.n_trunc;
    const VectorXd gm2N = gamma_pows(sys.gamma, N, -2.0);
    const MatrixXcd& C = faber.c();
    const double sg = mat.sigma_c / mat.sigma_m;
    MatrixXcd lhs = (MatrixXcd(sol.alpha.asDiagonal()) * C + sol.s);
    lhs.array().rowwise() *= gm2N.transpose().array();
    MatrixXcd rhs = MatrixXcd(sol.alpha.conjugate().asDiagonal()) - sg * sol.beta.conjugate();
    MatrixXcd bC = sol.beta * C;
    bC.array().rowwise() *= gm2N.transpose().array();
    rhs += sg * bC;
    return (lhs - rhs).norm();
}

}  // namespace iforge

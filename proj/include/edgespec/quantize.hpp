#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "edgespec/band.hpp"
#include "edgespec/effsymbol.hpp"
#include "edgespec/eigcore.hpp"
#include "edgespec/geometry.hpp"

namespace edgespec {

// Galerkin matrix in the basis e^{i pi m s / L} / sqrt(2L), m = m_center - n_modes .. m_center + n_modes.
struct EdgeOperator {
    double hbar = 0;
    double theta = 0;
    double L = 0;
    long long m_center = 0;
    int n_modes = 0;
    HermitianMatrix matrix;

    Eigen::Index order() const { return matrix.order(); }
    long long mode(Eigen::Index i) const { return m_center - n_modes + i; }
};

namespace detail {

// c_j = (1/N) sum_i f(s_i) e^{-i pi j s_i / L} for |j| <= jmax.
inline std::vector<cplx> fourier_coefficients(const std::vector<double>& s, const std::vector<double>& f, double L,
                                              int jmax) {
    const std::size_t N = f.size();
    std::vector<cplx> c(2 * std::size_t(jmax) + 1);
    for (int j = -jmax; j <= jmax; ++j) {
        cplx acc = 0;
        for (std::size_t i = 0; i < N; ++i) acc += f[i] * std::polar(1.0, -M_PI * j * s[i] / L);
        c[std::size_t(j + jmax)] = acc / double(N);
    }
    return c;
}

// Toeplitz matrix of multiplication by f: entry (m, n) = c_{m-n}.
inline Eigen::MatrixXcd multiplication(const std::vector<cplx>& c, int jmax, Eigen::Index n) {
    Eigen::MatrixXcd M(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index q = 0; q < n; ++q) M(r, q) = c[std::size_t(r - q + jmax)];
    return M;
}

inline void symmetrize(Eigen::MatrixXcd& M) { M = 0.5 * (M + M.adjoint()).eval(); }

inline void require_unaliased(std::size_t samples, int n_modes) {
    if (samples < 4 * std::size_t(n_modes) + 1)
        throw InvalidInput("s-grid has " + std::to_string(samples) + " samples; need at least 4*n_modes+1 = " +
                           std::to_string(4 * n_modes + 1) + " (increase samples or lower modes)");
}

} // namespace detail

// Op^w of (mu''/2)(sigma + theta - sigma_a - hbar c1(s))^2 - hbar lin(s) - hbar^2 quad(s).
// The square is the exact operator product, with c1^2 taken from the Fourier
// coefficients of c1(s)^2.
inline EdgeOperator quantize_reduced(const ReducedSymbol& rs, double L, double hbar, double theta, int n_modes) {
    require(hbar > 0 && std::isfinite(theta), "need hbar > 0 and finite theta");
    require(n_modes >= 1, "n_modes must be >= 1");
    detail::require_unaliased(rs.s_samples.size(), n_modes);
    const int J = 2 * n_modes;
    double c1_mean = 0;
    for (double c : rs.c1_samples) c1_mean += c;
    c1_mean /= double(rs.c1_samples.size());

    EdgeOperator op;
    op.hbar = hbar;
    op.theta = theta;
    op.L = L;
    op.n_modes = n_modes;
    op.m_center = std::llround((rs.sigma_a + hbar * c1_mean - theta) * L / (M_PI * hbar));
    const Eigen::Index n = 2 * n_modes + 1;

    std::vector<double> c1sq(rs.c1_samples.size());
    for (std::size_t i = 0; i < c1sq.size(); ++i) c1sq[i] = rs.c1_samples[i] * rs.c1_samples[i];
    auto C = detail::multiplication(detail::fourier_coefficients(rs.s_samples, rs.c1_samples, L, J), J, n);
    auto C2 = detail::multiplication(detail::fourier_coefficients(rs.s_samples, c1sq, L, J), J, n);
    auto Lin = detail::multiplication(detail::fourier_coefficients(rs.s_samples, rs.lin_samples, L, J), J, n);
    auto Quad = detail::multiplication(detail::fourier_coefficients(rs.s_samples, rs.quad_samples, L, J), J, n);

    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = hbar * M_PI * double(op.mode(i)) / L + theta - rs.sigma_a;
    Eigen::MatrixXcd XC = x.asDiagonal() * C;
    Eigen::MatrixXcd sq = Eigen::MatrixXcd(x.cwiseAbs2().asDiagonal());
    sq -= hbar * (XC + XC.adjoint());
    sq += hbar * hbar * C2;
    Eigen::MatrixXcd M = 0.5 * rs.mu_pp * sq - hbar * Lin - hbar * hbar * Quad;
    detail::symmetrize(M);
    op.matrix.entries = std::move(M);
    return op;
}

// (mu''/2)(D_s + alpha)^2 + C0 k(s)^2 on 2L-periodic functions.
inline EdgeOperator a_minus1_operator(const CurveGeometry& geom, double alpha, double C0, double mu_pp, int n_modes) {
    require(mu_pp > 0 && std::isfinite(alpha) && std::isfinite(C0), "invalid a = -1 operator parameters");
    require(n_modes >= 1, "n_modes must be >= 1");
    detail::require_unaliased(geom.size(), n_modes);
    const int J = 2 * n_modes;
    const double L = geom.L;
    EdgeOperator op;
    op.hbar = 1;
    op.theta = alpha;
    op.L = L;
    op.n_modes = n_modes;
    op.m_center = std::llround(-alpha * L / M_PI);
    const Eigen::Index n = 2 * n_modes + 1;
    std::vector<double> k2(geom.size());
    for (std::size_t i = 0; i < k2.size(); ++i) k2[i] = geom.k_samples[i] * geom.k_samples[i];
    Eigen::MatrixXcd M = C0 * detail::multiplication(detail::fourier_coefficients(geom.s_samples, k2, L, J), J, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = M_PI * double(op.mode(i)) / L + alpha;
        M(i, i) += 0.5 * mu_pp * x * x;
    }
    detail::symmetrize(M);
    op.matrix.entries = std::move(M);
    return op;
}

struct SpectrumResult {
    std::vector<double> eigenvalues;
    std::optional<long> count_below_E;
    double truncation_mass = 0; // largest weight of a returned eigenvector on the two outermost modes per side
    double hermiticity_residual = 0;
    int n_modes = 0;
};

inline SpectrumResult spectrum_lowest(const EdgeOperator& op, int n, std::optional<double> E = std::nullopt) {
    require(n >= 1 && n <= op.order(), "spectrum_lowest: n out of range");
    SpectrumResult r;
    r.hermiticity_residual = op.matrix.hermiticity_residual();
    r.n_modes = op.n_modes;
    auto es = dense_hermitian_eigensystem(op.matrix, op.order());
    r.eigenvalues.assign(es.values.begin(), es.values.begin() + n);
    const Eigen::Index N = op.order();
    const Eigen::Index edge = std::min<Eigen::Index>(2, N / 2);
    for (int j = 0; j < n; ++j) {
        double m = 0;
        for (Eigen::Index i = 0; i < edge; ++i) m += std::norm(es.vectors(i, j)) + std::norm(es.vectors(N - 1 - i, j));
        r.truncation_mass = std::max(r.truncation_mass, m);
    }
    if (E) {
        long c = 0;
        for (double v : es.values)
            if (v <= *E) ++c;
        r.count_below_E = c;
    }
    return r;
}

struct HarmonicPrediction {
    double reduced = 0;     // -C k_max hbar + (n - 1/2) hbar^{3/2} sqrt(-C mu'' k'')
    double full = 0;        // beta h - C k_max h^{3/2} + (n - 1/2) h^{7/4} sqrt(-C mu'' k''), h = hbar^2
    double level_gap = 0;   // hbar^{3/2} sqrt(-C mu'' k'')
};

inline HarmonicPrediction harmonic_prediction(const BandMinimum& m, const CurvatureMax& cm, double C, double hbar, int n) {
    require(cm.k_pp < 0, "harmonic prediction needs k''(s_max) < 0");
    require(C > 0, "harmonic prediction needs C(a) > 0");
    require(hbar > 0 && n >= 1, "need hbar > 0 and n >= 1");
    const double w = std::sqrt(-C * m.mu_pp * cm.k_pp);
    const double h = hbar * hbar;
    HarmonicPrediction p;
    p.level_gap = std::pow(hbar, 1.5) * w;
    p.reduced = -C * cm.k_max * hbar + (n - 0.5) * p.level_gap;
    p.full = m.beta_a * h - C * cm.k_max * std::pow(h, 1.5) + (n - 0.5) * std::pow(h, 1.75) * w;
    return p;
}

struct WeylCount {
    long count = 0;
    double prediction = 0;
    double sigma_minus = 0, sigma_plus = 0;
    double hbar = 0, theta = 0;
};

// #{m : mu_a(hbar pi m / L + theta) <= E} against L (sigma_+ - sigma_-) / (pi sqrt h).
inline WeylCount weyl_count(const BandMinimum& m, const CurveGeometry& geom, double E, double h) {
    require(h > 0, "h must be positive");
    require(E > m.beta_a && E < std::abs(m.a), "E must lie in (beta_a, |a|)");
    auto [lo, hi] = band_level_set(m.a, E, m);
    auto fo = flux_offsets(geom, h);
    const double hbar = fo.hbar, L = geom.L, step = hbar * M_PI / L;
    WeylCount w;
    w.sigma_minus = lo;
    w.sigma_plus = hi;
    w.hbar = hbar;
    w.theta = fo.theta;
    w.prediction = L * (hi - lo) / (M_PI * hbar);
    long long first = (long long)std::ceil((lo - fo.theta) / step);
    long long last = (long long)std::floor((hi - fo.theta) / step);
    // lattice points next to sigma_+- are re-evaluated on the band function
    auto below = [&](long long j) {
        double s = step * double(j) + fo.theta;
        return band_value(m.a, s, 1, default_grid(m.a, std::abs(s))).mu <= E;
    };
    while (first - 1 <= last && below(first - 1)) --first;
    while (first <= last && !below(first)) ++first;
    while (below(last + 1)) ++last;
    while (last >= first && !below(last)) --last;
    w.count = last >= first ? long(last - first + 1) : 0;
    return w;
}

} // namespace edgespec

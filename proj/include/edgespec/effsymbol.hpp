#pragma once

#include <cmath>
#include <vector>

#include "edgespec/band.hpp"
#include "edgespec/geometry.hpp"
#include "edgespec/moments.hpp"

namespace edgespec {

// Coefficients of the effective symbol with the curvature factored out:
// q1(s, sigma) = k(s) g1(sigma), q2(s, sigma) = k(s)^2 g2(sigma).
struct SymbolCoefficients {
    double a = 0;
    double sigma = 0;
    double z = 0;
    double g1 = 0;
    double g1_prime_sigma = 0;
    double g2 = 0;
    double resolvent_term = 0; // <(h - z)^{-1} w, w> on the complement of u
    double n2_term = 0;        // <(3t^2 x^2 + 2 b t^3 x + b^2 t^4 / 4) u, u>, x = sigma - b t
    double deflation_residual = 0;
};

namespace detail {

inline double n1_weight(double t, double b, double sigma) {
    double x = sigma - b * t;
    return 2 * t * x * x + b * t * t * x;
}

inline double n2_weight(double t, double b, double sigma) {
    double x = sigma - b * t;
    return 3 * t * t * x * x + 2 * b * t * t * t * x + 0.25 * b * b * t * t * t * t;
}

inline double n1_on_grid(double a, double sigma, const TransverseGrid& g) {
    LevelState st = solve_level(a, sigma, 1, g);
    if (st.tail > 1e-12) throw NumericalError("n1_element: ground state not decayed at the truncation boundary");
    return split_trapezoid(g, a, [&](std::size_t i, double t, double b) {
        return n1_weight(t, b, sigma) * st.state[i] * st.state[i];
    });
}

struct GridQ2 {
    double resolvent = 0, n2 = 0, residual = 0;
};

inline GridQ2 q2_on_grid(double a, double sigma, double z, const TransverseGrid& g) {
    TridiagonalOperator T = assemble_transverse(a, sigma, g);
    Vec u = tridiag_eigvec(T, tridiag_lowest(T, 1)[0]);
    const std::size_t n = T.size();
    Vec w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = g.t(i + 1);
        w[i] = n1_weight(t, step_field(a, t), sigma) * u[i];
    }
    auto sol = deflated_solve(T, z, u, w);
    GridQ2 r;
    r.resolvent = wdot(sol.v, w, g.spacing);
    r.residual = sol.residual;
    for (std::size_t i = 0; i < n; ++i) {
        double t = g.t(i + 1);
        r.n2 += n2_weight(t, step_field(a, t), sigma) * u[i] * u[i];
    }
    r.n2 *= g.spacing;
    return r;
}

} // namespace detail

// <(2t(sigma - b t)^2 + b t^2 (sigma - b t)) u, u>, Richardson over h and 2h.
inline double n1_element(double a, double sigma, const TransverseGrid& grid) {
    return richardson(detail::n1_on_grid(a, sigma, grid), detail::n1_on_grid(a, sigma, grid.coarsened()));
}

struct Q1 {
    double g1 = 0;
    double g1_prime_sigma = 0;
    double derivative_error = 0; // |D(h) - D(2h)| / 3 of the centred differences
};

inline Q1 q1_pm(double a, double sigma, const TransverseGrid& grid) {
    const double d = 1e-4;
    auto g1 = [&](double s) { return -n1_element(a, s, grid); };
    double p1 = g1(sigma + d), m1 = g1(sigma - d), p2 = g1(sigma + 2 * d), m2 = g1(sigma - 2 * d);
    double D1 = (p1 - m1) / (2 * d), D2 = (p2 - m2) / (4 * d);
    Q1 q;
    q.g1 = g1(sigma);
    q.g1_prime_sigma = richardson(D1, D2);
    q.derivative_error = std::abs(D1 - D2) / 3;
    return q;
}

// g2 = <q0_z w, w> - <n2-part u, u> + 1/4, the k^2 coefficient of
// <q0_z n1 u, n1 u> - <n2 u, u>.
inline SymbolCoefficients q2_pm(double a, double sigma, double z, const TransverseGrid& grid) {
    require(std::isfinite(z), "z must be finite");
    auto f = detail::q2_on_grid(a, sigma, z, grid);
    auto c = detail::q2_on_grid(a, sigma, z, grid.coarsened());
    SymbolCoefficients s;
    s.a = a;
    s.sigma = sigma;
    s.z = z;
    s.resolvent_term = richardson(f.resolvent, c.resolvent);
    s.n2_term = richardson(f.n2, c.n2);
    s.g2 = s.resolvent_term - s.n2_term + 0.25;
    s.deflation_residual = std::max(f.residual, c.residual);
    return s;
}

inline SymbolCoefficients symbol_coefficients(const BandMinimum& m) {
    auto q1 = q1_pm(m.a, m.sigma_a, m.grid);
    auto s = q2_pm(m.a, m.sigma_a, m.beta_a, m.grid);
    s.g1 = q1.g1;
    s.g1_prime_sigma = q1.g1_prime_sigma;
    return s;
}

// Samples of the quadratic reduced symbol
//   b(s, sigma) = mu''/2 (sigma - sigma_a - hbar c1(s))^2 - hbar lin(s) - hbar^2 quad(s).
struct ReducedSymbol {
    double a = 0;
    double mu_pp = 0;
    double sigma_a = 0;
    double beta_a = 0;
    SymbolCoefficients coeffs;
    std::vector<double> s_samples, k_samples;
    std::vector<double> c1_samples, lin_samples, quad_samples;
};

inline ReducedSymbol reduced_symbol(const BandMinimum& m, const SymbolCoefficients& c, const CurveGeometry& geom) {
    require(m.mu_pp > 0, "reduced_symbol: band minimum must be non-degenerate");
    ReducedSymbol r;
    r.a = m.a;
    r.mu_pp = m.mu_pp;
    r.sigma_a = m.sigma_a;
    r.beta_a = m.beta_a;
    r.coeffs = c;
    r.s_samples = geom.s_samples;
    r.k_samples = geom.k_samples;
    const std::size_t N = geom.size();
    r.c1_samples.resize(N);
    r.lin_samples.resize(N);
    r.quad_samples.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        double k = geom.k_samples[i];
        r.lin_samples[i] = k * c.g1;
        r.c1_samples[i] = k * c.g1_prime_sigma / m.mu_pp;
        r.quad_samples[i] = k * k * c.g2 + (k * c.g1_prime_sigma) * (k * c.g1_prime_sigma) / (2 * m.mu_pp);
    }
    return r;
}

inline ReducedSymbol reduced_symbol(double a, const CurveGeometry& geom) {
    auto m = band_minimum(a);
    return reduced_symbol(m, symbol_coefficients(m), geom);
}

} // namespace edgespec

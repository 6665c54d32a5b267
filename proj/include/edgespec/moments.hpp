#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "edgespec/band.hpp"

namespace edgespec {

struct MomentSet {
    double a = 0;
    double sigma = 0;
    double beta = 0;
    std::array<double, 5> values{};
    double quadrature_error = 0;
    double phi0 = 0;  // phi_a(0)
    double dphi0 = 0; // phi_a'(0), average of the one-sided second-order differences
    double int_iii = 0; // int t (sigma - b t)^2 phi^2
    double int_iv = 0;  // int b t^2 (sigma - b t) phi^2
    TransverseGrid grid;
};

namespace detail {

struct GridMoments {
    std::array<double, 5> m{};
    double phi0 = 0, dphi0 = 0, iii = 0, iv = 0;
};

// Trapezoid rule on [-T, T] split at the central node; f(t, b) receives the
// side's field value so that t = 0 is counted half with each side's weight.
template <class F>
double split_trapezoid(const TransverseGrid& g, double a, F&& f) {
    const std::size_t c = g.half();
    double s = 0;
    for (std::size_t i = 0; i < g.N; ++i) {
        if (i == c) continue;
        double t = g.t(i);
        s += f(i, t, step_field(a, t));
    }
    s += 0.5 * (f(c, 0.0, a) + f(c, 0.0, 1.0));
    return s * g.spacing;
}

inline GridMoments grid_moments(double a, double sigma, const TransverseGrid& g) {
    LevelState st = solve_level(a, sigma, 1, g);
    const Vec& u = st.state;
    GridMoments r;
    for (int n = 0; n <= 4; ++n)
        r.m[n] = split_trapezoid(g, a, [&](std::size_t i, double t, double b) {
            return std::pow(b * t - sigma, n) / b * u[i] * u[i];
        });
    r.iii = split_trapezoid(g, a, [&](std::size_t i, double t, double b) {
        double x = sigma - b * t;
        return t * x * x * u[i] * u[i];
    });
    r.iv = split_trapezoid(g, a, [&](std::size_t i, double t, double b) {
        return b * t * t * (sigma - b * t) * u[i] * u[i];
    });
    const std::size_t c = g.half();
    const double h = g.spacing;
    r.phi0 = u[c];
    double right = (-3 * u[c] + 4 * u[c + 1] - u[c + 2]) / (2 * h);
    double left = (3 * u[c] - 4 * u[c - 1] + u[c - 2]) / (2 * h);
    r.dphi0 = 0.5 * (left + right);
    return r;
}

} // namespace detail

inline MomentSet moments(double a, const BandMinimum& minimum, const TransverseGrid& grid) {
    require(std::abs(a) >= 1e-6, "moments: |a| < 1e-6 makes the weight 1/b singular");
    require(std::abs(minimum.a - a) < 1e-15, "moments: band minimum belongs to a different a");
    TransverseGrid g2 = grid.coarsened(), g4 = g2.coarsened();
    const double s = minimum.sigma_a;
    auto f = detail::grid_moments(a, s, grid);
    auto c = detail::grid_moments(a, s, g2);
    auto cc = detail::grid_moments(a, s, g4);
    MomentSet out;
    out.a = a;
    out.sigma = s;
    out.beta = minimum.beta_a;
    out.grid = grid;
    for (int n = 0; n <= 4; ++n) {
        out.values[n] = richardson(f.m[n], c.m[n]);
        double e = std::abs(out.values[n] - richardson(c.m[n], cc.m[n])) / 15.0;
        out.quadrature_error = std::max(out.quadrature_error, e);
    }
    out.phi0 = richardson(f.phi0, c.phi0);
    out.dphi0 = richardson(f.dphi0, c.dphi0);
    out.int_iii = richardson(f.iii, c.iii);
    out.int_iv = richardson(f.iv, c.iv);
    return out;
}

inline MomentSet moments(double a, const BandMinimum& minimum) { return moments(a, minimum, minimum.grid); }

// Residuals of the moment identities. The gating M2/M3 forms are
//   M2 = beta M0 / 2 + (1/a - 1) phi(0) phi'(0) / 4,
//   M3 = (1 - 1/a) sigma phi(0) phi'(0) / 3,
// while the *_alt residuals use -beta M0/2 + (1/a - 1) sigma phi phi'/4 and
// (1/a - 1) sigma phi phi'/3 and are reported only.
struct MomentIdentityReport {
    double a = 0;
    double m1 = 0;
    double m2 = 0, m3 = 0;
    double m2_alt = 0, m3_alt = 0;
    double iii = 0, iv = 0;
    double sum = 0; // 2 (iii) + (iv) = M3

    double max_gating() const { return std::max({m1, m2, m3, iii, iv, sum}); }
};

inline MomentIdentityReport check_moment_identities(const MomentSet& M) {
    const double a = M.a, s = M.sigma, pp = M.phi0 * M.dphi0;
    const auto& m = M.values;
    MomentIdentityReport r;
    r.a = a;
    r.m1 = std::abs(m[1]);
    r.m2 = std::abs(m[2] - (0.5 * M.beta * m[0] + 0.25 * (1 / a - 1) * pp));
    r.m3 = std::abs(m[3] - (1 - 1 / a) * s * pp / 3);
    r.m2_alt = std::abs(m[2] - (-0.5 * M.beta * m[0] + 0.25 * (1 / a - 1) * s * pp));
    r.m3_alt = std::abs(m[3] - (1 / a - 1) * s * pp / 3);
    r.iii = std::abs(M.int_iii - (m[3] + s * m[2]));
    r.iv = std::abs(M.int_iv - (-m[3] - 2 * s * m[2]));
    r.sum = std::abs(2 * M.int_iii + M.int_iv - m[3]);
    return r;
}

inline MomentIdentityReport check_moment_identities(double a) {
    auto bm = band_minimum(a);
    return check_moment_identities(moments(a, bm));
}

inline double constant_C(const MomentSet& M) { return -M.values[3]; }

inline double constant_C(double a) {
    require(a >= -1.0 && a < 0.0, "constant_C needs a in [-1, 0)");
    auto bm = band_minimum(a);
    return constant_C(moments(a, bm));
}

// de Gennes model: -d^2/dt^2 + (sigma - t)^2 on [0, T], Neumann at 0, Dirichlet at T.
struct DeGennesData {
    double Theta0 = 0;
    double xi0 = 0;       // sqrt(Theta0)
    double sigma_min = 0; // minimizer of the extrapolated band function
    double theta_convergence = 0; // |Theta0(h, 2h) - Theta0(2h, 4h)|
    double mu_pp = 0;
    int newton_iterations = 0;
    Vec f0;                 // K+1 samples at t_j = j h, f0[K] = 0, trapezoid-normalized
    std::array<double, 5> halfmoments{}; // int (xi0 - t)^k f0^2
    double halfmoment_error = 0;
    double f0_sq_at_0 = 0;
    TransverseGrid grid; // full-line grid with the same T and spacing
    std::size_t K() const { return grid.half(); }
    double spacing() const { return grid.spacing; }
};

namespace detail {

struct HalfLineState {
    double mu = 0, dmu = 0;
    Vec f;
};

// Ghost-node Neumann stencil symmetrized by D = diag(1/2, 1, ...): the
// similarity-transformed matrix has sqrt(2)/h^2 in the first off-diagonal.
inline HalfLineState neumann_level(double sigma, std::size_t K, double h) {
    const double inv = 1 / (h * h);
    TridiagonalOperator S;
    S.spacing = h;
    S.diag.resize(K);
    S.offdiag.assign(K - 1, -inv);
    S.offdiag[0] = -std::sqrt(2.0) * inv;
    for (std::size_t j = 0; j < K; ++j) {
        double x = sigma - double(j) * h;
        S.diag[j] = 2 * inv + x * x;
    }
    double lam = tridiag_lowest(S, 1)[0];
    Vec y = tridiag_eigvec(S, lam);
    HalfLineState out;
    out.f.assign(K + 1, 0.0);
    for (std::size_t j = 0; j < K; ++j) out.f[j] = y[j];
    out.f[0] *= std::sqrt(2.0);
    // generalized Rayleigh quotient in the u variables, all terms non-negative
    double num = 0, den = 0, d = 0;
    for (std::size_t j = 0; j < K; ++j) {
        double du = out.f[j + 1] - out.f[j];
        double w = j == 0 ? 0.5 : 1.0;
        double x = sigma - double(j) * h;
        num += du * du * inv + w * x * x * out.f[j] * out.f[j];
        den += w * out.f[j] * out.f[j];
        d += w * 2 * x * out.f[j] * out.f[j];
    }
    out.mu = num / den;
    out.dmu = d / den;
    return out;
}

inline MuPair neumann_extrapolated(double sigma, std::size_t K, double h) {
    auto f = neumann_level(sigma, K, h);
    auto c = neumann_level(sigma, K / 2, 2 * h);
    return {richardson(f.mu, c.mu), richardson(f.dmu, c.dmu)};
}

// Half-line trapezoid with weight 1/2 at t = 0.
template <class F>
double half_trapezoid(std::size_t K, double h, F&& f) {
    double s = 0.5 * f(std::size_t(0), 0.0);
    for (std::size_t j = 1; j <= K; ++j) s += f(j, double(j) * h);
    return s * h;
}

} // namespace detail

inline DeGennesData degennes(const TransverseGrid& grid) {
    grid.validate();
    const std::size_t K = grid.half();
    const double h = grid.spacing, T = grid.T;
    require(K % 4 == 0 && K >= 16, "degennes: half-line interval count must be a multiple of 4, at least 16");
    require(T >= 12.0, "degennes: T must be at least 12");

    double best_s = 0, best_mu = INFINITY;
    for (double s = -2.0; s <= 4.0 + 1e-12; s += 0.25) {
        std::size_t Kc = std::size_t(std::ceil(T * 50));
        double mu = detail::neumann_level(s, Kc, T / double(Kc)).mu;
        if (mu < best_mu) best_mu = mu, best_s = s;
    }
    auto r = detail::minimize_extrapolated([&](double s) { return detail::neumann_extrapolated(s, K, h); },
                                           best_s - 0.25, best_s + 0.25, 1e-10);
    DeGennesData dg;
    dg.grid = grid;
    dg.Theta0 = r.value.mu;
    dg.xi0 = std::sqrt(dg.Theta0);
    dg.sigma_min = r.sigma;
    dg.mu_pp = r.mu_pp;
    dg.newton_iterations = r.iterations;
    dg.theta_convergence = std::abs(dg.Theta0 - detail::neumann_extrapolated(r.sigma, K / 2, 2 * h).mu);

    const double xi = dg.xi0;
    auto quantities = [&](std::size_t k, double hk) {
        auto st = detail::neumann_level(xi, k, hk);
        std::array<double, 6> q{};
        for (int n = 0; n <= 4; ++n)
            q[n] = detail::half_trapezoid(k, hk, [&](std::size_t j, double t) {
                return std::pow(xi - t, n) * st.f[j] * st.f[j];
            });
        q[5] = st.f[0] * st.f[0];
        return std::make_pair(q, std::move(st.f));
    };
    auto [qf, f0] = quantities(K, h);
    auto [qc, f1] = quantities(K / 2, 2 * h);
    auto [qcc, f2] = quantities(K / 4, 4 * h);
    for (int n = 0; n <= 4; ++n) {
        dg.halfmoments[n] = richardson(qf[n], qc[n]);
        dg.halfmoment_error = std::max(dg.halfmoment_error, std::abs(dg.halfmoments[n] - richardson(qc[n], qcc[n])) / 15);
    }
    dg.f0_sq_at_0 = richardson(qf[5], qc[5]);
    dg.f0 = std::move(f0);
    if (dg.f0[0] <= 0 || sign_changes(dg.f0) != 0) throw NumericalError("degennes: ground state is not positive");
    return dg;
}

inline DeGennesData degennes(std::size_t gridN, double T) {
    require(gridN >= 16 && T > 0, "degennes: need gridN >= 16 and T > 0");
    return degennes(TransverseGrid::make(T, T / double(gridN)));
}

inline DeGennesData degennes() { return degennes(TransverseGrid::make(15.0, 1.0 / 400)); }

struct GConstants {
    double alt_form1 = 0; // -7 M4 + 3/2 xi0 M3 + 3/2 Theta0^2
    double alt_form2 = 0; // -21/8 - 9/8 Theta0^2 - 57/4 xi0 M3
    double corrected_form1 = 0; // -4/3 M4 + 5/3 xi0 M3 + Theta0^2 / 2
    double corrected_form2 = 0; // -1/2 - 4/3 xi0 M3
    double G_direct = 0;          // Dirichlet solve at t = 0
    double G_direct_deflated = 0; // full line, odd source, deflated against the even ground state
    double route_difference = 0;  // |<v,w>| difference between the two routes
    double direct_error = 0;      // Richardson error estimate of G_direct
    double vw = 0;
    double quad_term = 0;
};

namespace detail {

struct GridG {
    double vw_plain = 0, vw_deflated = 0, quad = 0;
};

inline GridG grid_G(const DeGennesData& dg, std::size_t K, double h) {
    const double xi = dg.xi0, z = dg.Theta0, inv = 1 / (h * h);
    auto st = neumann_level(xi, K, h);
    const Vec& f = st.f;
    auto source = [&](double t) { return 2 * t * (xi - t) * (xi - t) + t * t * (xi - t); };
    GridG r;
    r.quad = half_trapezoid(K, h, [&](std::size_t j, double t) {
        double x = xi - t;
        return (3 * t * t * x * x + 2 * t * t * t * x + 0.25 * t * t * t * t) * f[j] * f[j];
    });

    // plain: nodes 1..K-1, Dirichlet at both ends
    TridiagonalOperator D;
    D.spacing = h;
    D.diag.resize(K - 1);
    D.offdiag.assign(K - 2, -inv);
    Vec w(K - 1);
    for (std::size_t j = 1; j < K; ++j) {
        double t = double(j) * h;
        D.diag[j - 1] = 2 * inv + (xi - t) * (xi - t);
        w[j - 1] = source(t) * f[j];
    }
    if (sturm_count(D, z) != 0) throw IllPosed("constant_G: Dirichlet operator has spectrum below Theta0");
    TridiagLU lu(D, z, std::numeric_limits<double>::epsilon() * D.norm_inf());
    Vec v = w;
    lu.solve(v);
    r.vw_plain = wdot(v, w, h);

    // deflated: full line at a = -1, odd extension of the source
    TransverseGrid g{dg.grid.T, 2 * K + 1, h};
    TridiagonalOperator F = assemble_transverse(-1.0, xi, g);
    Vec u = tridiag_eigvec(F, tridiag_lowest(F, 1)[0]);
    Vec wf(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) {
        double t = g.t(i + 1), b = step_field(-1.0, t);
        wf[i] = (2 * t * (xi - b * t) * (xi - b * t) + b * t * t * (xi - b * t)) * u[i];
    }
    auto sol = deflated_solve(F, z, u, wf);
    r.vw_deflated = wdot(sol.v, wf, h);
    return r;
}

} // namespace detail

inline GConstants constant_G(const DeGennesData& dg) {
    require(dg.Theta0 > 0 && dg.K() >= 16, "constant_G: de Gennes data not converged");
    const double Th = dg.Theta0, xi = dg.xi0;
    const auto& M = dg.halfmoments;
    GConstants G;
    G.alt_form1 = -7 * M[4] + 1.5 * xi * M[3] + 1.5 * Th * Th;
    G.alt_form2 = -21.0 / 8 - 9.0 / 8 * Th * Th - 57.0 / 4 * xi * M[3];
    G.corrected_form1 = -4.0 / 3 * M[4] + 5.0 / 3 * xi * M[3] + 0.5 * Th * Th;
    G.corrected_form2 = -0.5 - 4.0 / 3 * xi * M[3];

    const std::size_t K = dg.K();
    const double h = dg.spacing();
    auto f = detail::grid_G(dg, K, h);
    auto c = detail::grid_G(dg, K / 2, 2 * h);
    auto cc = detail::grid_G(dg, K / 4, 4 * h);
    auto g_of = [](const detail::GridG& x, bool deflated) {
        return 2 * (deflated ? x.vw_deflated : x.vw_plain) - 2 * x.quad;
    };
    G.G_direct = richardson(g_of(f, false), g_of(c, false));
    G.G_direct_deflated = richardson(g_of(f, true), g_of(c, true));
    G.direct_error = std::abs(G.G_direct - richardson(g_of(c, false), g_of(cc, false))) / 15;
    G.vw = richardson(f.vw_plain, c.vw_plain);
    G.quad_term = richardson(f.quad, c.quad);
    G.route_difference = std::abs(G.vw - richardson(f.vw_deflated, c.vw_deflated));
    return G;
}

struct UniversalConstants {
    double a = 0;
    double C_of_a = 0;
    double G = 0;
    double C0 = 0;         // -1/4 - G/2, the value entering the effective operator
    double C0_alt = 0; // -1/4 + G
};

inline UniversalConstants universal_constants(const MomentSet& M, const GConstants& G) {
    UniversalConstants u;
    u.a = M.a;
    u.C_of_a = constant_C(M);
    u.G = G.G_direct;
    u.C0 = -0.25 - 0.5 * G.G_direct;
    u.C0_alt = -0.25 + G.G_direct;
    return u;
}

} // namespace edgespec

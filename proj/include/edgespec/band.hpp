#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "edgespec/eigcore.hpp"

namespace edgespec {

// b_a(t) = 1 for t > 0, a for t < 0. At t = 0 only b_a(0)*0 = 0 is ever used.
inline double step_field(double a, double t) { return t > 0 ? 1.0 : a; }

struct ModelParams {
    double a = -0.5;
    double h = 0;
    double hbar = 0;
    double E = 0;
    double Eplus = 0;

    static ModelParams make(double a, double h = 0, double E = 0, double Eplus = 0) {
        ModelParams p{a, h, h > 0 ? std::sqrt(h) : 0.0, E, Eplus};
        p.validate();
        return p;
    }

    void validate() const {
        require(std::isfinite(a) && a >= -1.0 && a <= 1.0 && a != 0.0, "a must lie in [-1, 1] \\ {0}");
        require(h >= 0 && std::isfinite(h), "h must be non-negative");
        if (E != 0 || Eplus != 0) {
            require(E > 0 && E < std::abs(a), "E must lie in (0, |a|)");
            require(Eplus == 0 || (E < Eplus && Eplus < std::abs(a)), "need E < Eplus < |a|");
        }
    }
};

// Uniform grid on [-T, T] with t = 0 on the central node. The interior count
// K = (N-1)/2 is a multiple of 4 so that two successive coarsenings stay aligned.
struct TransverseGrid {
    double T = 14.0;
    std::size_t N = 0;
    double spacing = 0;

    std::size_t half() const { return (N - 1) / 2; }
    double t(std::size_t i) const { return (double(i) - double(half())) * spacing; }

    static TransverseGrid make(double T, double max_spacing) {
        require(T > 0 && max_spacing > 0, "grid needs T > 0 and spacing > 0");
        std::size_t K = std::size_t(std::ceil(T / max_spacing - 1e-9));
        K = std::max<std::size_t>(K, 8);
        K = (K + 3) / 4 * 4;
        return TransverseGrid{T, 2 * K + 1, T / double(K)};
    }

    TransverseGrid coarsened() const {
        std::size_t K = half();
        require(K % 2 == 0 && K >= 4, "grid cannot be coarsened");
        return TransverseGrid{T, K + 1, T / double(K / 2)};
    }

    void validate() const {
        require(N >= 5 && N % 2 == 1, "grid must have an odd number of points");
        require(std::abs(spacing * double(half()) - T) <= 1e-12 * T, "grid spacing inconsistent with T");
    }
};

// Truncation half-width for wells at t = sigma and t = sigma/a.
inline double default_half_width(double a, double sigma_max) {
    double well = std::max({0.0, sigma_max, sigma_max / std::abs(a)});
    return well + 14.0 / std::sqrt(std::min(1.0, std::abs(a)));
}

inline TransverseGrid default_grid(double a, double sigma_max, double max_spacing = 1.0 / 400) {
    return TransverseGrid::make(default_half_width(a, sigma_max), max_spacing);
}

// Interior-node discretization of -d^2/dt^2 + (sigma - b_a(t) t)^2 with
// Dirichlet ends. Index j of the operator is grid node j+1.
inline TridiagonalOperator assemble_transverse(double a, double sigma, const TransverseGrid& g) {
    g.validate();
    const std::size_t n = g.N - 2;
    const double inv = 1.0 / (g.spacing * g.spacing);
    TridiagonalOperator T;
    T.spacing = g.spacing;
    T.diag.resize(n);
    T.rowsum.resize(n);
    T.offdiag.assign(n - 1, -inv);
    for (std::size_t j = 0; j < n; ++j) {
        double t = g.t(j + 1);
        double x = sigma - step_field(a, t) * t;
        T.rowsum[j] = x * x;
        T.diag[j] = 2 * inv + x * x;
    }
    T.rowsum.front() += inv;
    T.rowsum.back() += inv;
    return T;
}

// Eigenpair of one discretization; state has N samples with zero ends.
struct LevelState {
    double mu = 0;
    double dmu = 0; // Feynman-Hellmann derivative in sigma (exact for the discrete problem)
    Vec state;
    double tail = 0; // max |u| on the nodes next to +-T relative to max |u|
};

inline LevelState solve_level(double a, double sigma, int n, const TransverseGrid& g) {
    require(n >= 1, "level must be >= 1");
    TridiagonalOperator T = assemble_transverse(a, sigma, g);
    auto ev = tridiag_lowest(T, std::size_t(n));
    Vec v = tridiag_eigvec(T, ev.back());
    LevelState out;
    out.mu = rayleigh_quotient(T, v);
    out.state.assign(g.N, 0.0);
    std::copy(v.begin(), v.end(), out.state.begin() + 1);
    double vmax = 0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    out.tail = std::max(std::abs(v.front()), std::abs(v.back())) / vmax;
    double d = 0;
    for (std::size_t i = 1; i + 1 < g.N; ++i) {
        double t = g.t(i);
        d += 2 * (sigma - step_field(a, t) * t) * out.state[i] * out.state[i];
    }
    out.dmu = d * g.spacing;
    return out;
}

inline double richardson(double fine, double coarse) { return (4 * fine - coarse) / 3; }

struct BandPoint {
    double a = 0;
    double sigma = 0;
    int level = 1;
    double mu = 0;
    double error_estimate = 0;
    std::optional<Vec> groundstate;
    TransverseGrid grid;
};

// Richardson value from spacings h and 2h; error from comparing with the (2h, 4h) pair.
inline BandPoint band_value(double a, double sigma, int n, const TransverseGrid& grid) {
    require(std::isfinite(sigma), "sigma must be finite");
    require(n >= 1, "level must be >= 1");
    TransverseGrid g2 = grid.coarsened(), g4 = g2.coarsened();
    LevelState f = solve_level(a, sigma, n, grid);
    if (f.tail > 1e-12)
        throw NumericalError("truncation check failed: enlarge the domain (tail " + std::to_string(f.tail) + ")");
    double m2 = solve_level(a, sigma, n, g2).mu;
    double m4 = solve_level(a, sigma, n, g4).mu;
    BandPoint p;
    p.a = a;
    p.sigma = sigma;
    p.level = n;
    p.mu = richardson(f.mu, m2);
    p.error_estimate = std::abs(p.mu - richardson(m2, m4)) / 15.0;
    p.grid = grid;
    if (n == 1) p.groundstate = std::move(f.state);
    return p;
}

inline BandPoint band_value(double a, double sigma, int n = 1) {
    return band_value(a, sigma, n, default_grid(a, std::abs(sigma)));
}

// Two-grid extrapolated mu and mu' (the pair used throughout minimization).
struct MuPair {
    double mu, dmu;
};

inline MuPair band_mu_extrapolated(double a, double sigma, const TransverseGrid& g) {
    LevelState f = solve_level(a, sigma, 1, g);
    LevelState c = solve_level(a, sigma, 1, g.coarsened());
    return {richardson(f.mu, c.mu), richardson(f.dmu, c.dmu)};
}

namespace detail {

struct MinimizeResult {
    double sigma;
    MuPair value;
    int iterations;
    double mu_pp, mu_pp_error;
};

// Golden section on [lo, hi] to 1e-4, then Newton on mu' with a
// finite-difference slope. mu'' by the 5-point stencil of mu with step 1e-3;
// its error estimate compares against the 5-point stencil of mu'.
template <class F>
MinimizeResult minimize_extrapolated(F&& f, double lo, double hi, double tol) {
    const double gr = (std::sqrt(5.0) - 1) / 2;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = f(x1).mu, f2 = f(x2).mu;
    while (hi - lo > 1e-4) {
        if (f1 < f2) {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - gr * (hi - lo), f1 = f(x1).mu;
        } else {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + gr * (hi - lo), f2 = f(x2).mu;
        }
    }
    double s = 0.5 * (lo + hi);
    MuPair p = f(s);
    int it = 0;
    for (; it < 30 && std::abs(p.dmu) > tol; ++it) {
        const double d = 1e-4;
        double slope = (f(s + d).dmu - f(s - d).dmu) / (2 * d);
        if (!(slope > 0)) throw NonConvergence("minimization: non-positive curvature during Newton");
        s -= p.dmu / slope;
        p = f(s);
    }
    if (std::abs(p.dmu) > tol) throw NonConvergence("minimization: Newton did not reach tolerance");
    const double hs = 1e-3;
    MuPair pp[5];
    for (int k = -2; k <= 2; ++k) pp[k + 2] = k == 0 ? p : f(s + k * hs);
    double mpp = (-pp[0].mu + 16 * pp[1].mu - 30 * pp[2].mu + 16 * pp[3].mu - pp[4].mu) / (12 * hs * hs);
    double from_fh = (pp[0].dmu - 8 * pp[1].dmu + 8 * pp[3].dmu - pp[4].dmu) / (12 * hs);
    return {s, p, it, mpp, std::abs(mpp - from_fh)};
}

} // namespace detail

struct BandMinimum {
    double a = 0;
    double sigma_a = 0;
    double beta_a = 0;
    double mu_pp = 0;
    double mu_pp_error = 0;
    double tol = 0;
    double dmu_at_min = 0;
    int newton_iterations = 0;
    TransverseGrid grid;
};

inline BandMinimum band_minimum(double a, const TransverseGrid& grid, double tol = 1e-10) {
    require(a >= -1.0 && a < 0.0, "band_minimum needs a in [-1, 0)");
    require(tol > 0, "tol must be positive");

    // coarse bracketing scan on [-5, 20]
    double best_s = 0, best_mu = INFINITY;
    std::size_t best_i = 0;
    std::vector<double> ss;
    for (double s = -5.0; s <= 20.0 + 1e-12; s += 0.25) ss.push_back(s);
    for (std::size_t i = 0; i < ss.size(); ++i) {
        double mu = solve_level(a, ss[i], 1, default_grid(a, std::abs(ss[i]), 1.0 / 50)).mu;
        if (mu < best_mu) best_mu = mu, best_s = ss[i], best_i = i;
    }
    if (best_i == 0 || best_i + 1 == ss.size()) throw NumericalError("no minimum of the band function in [-5, 20]");
    require(grid.T >= default_half_width(a, best_s + 0.25) - 1e-9, "grid too narrow for the band minimum");

    auto r = detail::minimize_extrapolated([&](double s) { return band_mu_extrapolated(a, s, grid); },
                                           best_s - 0.25, best_s + 0.25, tol);
    BandMinimum m;
    m.a = a;
    m.tol = tol;
    m.grid = grid;
    m.sigma_a = r.sigma;
    m.beta_a = r.value.mu;
    m.dmu_at_min = r.value.dmu;
    m.newton_iterations = r.iterations;
    m.mu_pp = r.mu_pp;
    m.mu_pp_error = r.mu_pp_error;
    return m;
}

inline BandMinimum band_minimum(double a, double tol = 1e-10) {
    return band_minimum(a, default_grid(a, 3.0), tol);
}

// Level set mu_a^{-1}(E) = [sigma_-, sigma_+] by bisection on each side of sigma(a).
inline std::pair<double, double> band_level_set(double a, double E, const BandMinimum& m, double max_spacing = 1.0 / 400) {
    require(E > m.beta_a && E < std::abs(a), "E must lie in (beta_a, |a|)");
    auto side = [&](double dir) {
        double far = m.sigma_a;
        double step = 0.5;
        for (;;) {
            far += dir * step;
            TransverseGrid g = default_grid(a, std::abs(far), max_spacing);
            if (band_mu_extrapolated(a, far, g).mu > E) break;
            step *= 2;
            if (std::abs(far) > 400) throw NumericalError("level set root not bracketed");
        }
        TransverseGrid g = default_grid(a, std::max(std::abs(far), std::abs(m.sigma_a)), max_spacing);
        double in = m.sigma_a, out = far;
        while (std::abs(out - in) > 1e-10) {
            double mid = 0.5 * (in + out);
            if (mid == in || mid == out) break;
            if (band_mu_extrapolated(a, mid, g).mu > E)
                out = mid;
            else
                in = mid;
        }
        return 0.5 * (in + out);
    };
    return {side(-1.0), side(+1.0)};
}

// Number of sign changes, ignoring entries below a relative threshold.
inline int sign_changes(const Vec& v, double rel = 1e-8) {
    double vmax = 0;
    for (double x : v) vmax = std::max(vmax, std::abs(x));
    int changes = 0, last = 0;
    for (double x : v) {
        if (std::abs(x) <= rel * vmax) continue;
        int s = x > 0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

} // namespace edgespec

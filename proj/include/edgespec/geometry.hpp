#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "edgespec/error.hpp"

namespace edgespec {

enum class CurveKind { circle, ellipse, fourier };

// Counterclockwise parametrization by phi in [0, 2pi).
//   circle:  params = {R}
//   ellipse: params = {p, q}, semi-axes along x and y
//   fourier: params = {R, e1, e2, ...}, r(phi) = R (1 + sum_j e_j cos(j phi))
struct CurveSpec {
    CurveKind kind = CurveKind::circle;
    std::vector<double> params{1.0};

    static CurveSpec circle(double R) { return make(CurveKind::circle, {R}); }
    static CurveSpec ellipse(double p, double q) { return make(CurveKind::ellipse, {p, q}); }
    static CurveSpec fourier(double R, std::vector<double> amps) {
        amps.insert(amps.begin(), R);
        return make(CurveKind::fourier, std::move(amps));
    }

    static CurveSpec parse(const std::string& name, const std::vector<double>& params) {
        if (name == "circle") return make(CurveKind::circle, params);
        if (name == "ellipse") return make(CurveKind::ellipse, params);
        if (name == "fourier" || name == "perturbed-circle") return make(CurveKind::fourier, params);
        throw InvalidInput("unknown curve '" + name + "' (expected circle, ellipse or fourier)");
    }

    std::string name() const {
        switch (kind) {
        case CurveKind::circle: return "circle";
        case CurveKind::ellipse: return "ellipse";
        default: return "fourier";
        }
    }

    void validate() const {
        for (double p : params) require(std::isfinite(p), "curve parameters must be finite");
        switch (kind) {
        case CurveKind::circle:
            require(params.size() == 1 && params[0] > 0, "circle needs one positive radius");
            break;
        case CurveKind::ellipse:
            require(params.size() == 2 && params[0] > 0 && params[1] > 0, "ellipse needs two positive semi-axes");
            break;
        case CurveKind::fourier: {
            require(params.size() >= 1 && params[0] > 0, "fourier curve needs a positive radius");
            double s = 0;
            for (std::size_t j = 1; j < params.size(); ++j) s += std::abs(params[j]);
            require(s < 1, "fourier amplitudes must keep r(phi) > 0");
            break;
        }
        }
    }

    // position, first and second derivatives in phi
    struct Jet {
        double x, y, dx, dy, ddx, ddy;
    };

    Jet jet(double phi) const {
        switch (kind) {
        case CurveKind::circle: {
            double R = params[0], c = std::cos(phi), s = std::sin(phi);
            return {R * c, R * s, -R * s, R * c, -R * c, -R * s};
        }
        case CurveKind::ellipse: {
            double p = params[0], q = params[1], c = std::cos(phi), s = std::sin(phi);
            return {p * c, q * s, -p * s, q * c, -p * c, -q * s};
        }
        default: {
            const double R = params[0];
            double r = 1, dr = 0, ddr = 0;
            for (std::size_t j = 1; j < params.size(); ++j) {
                double e = params[j], jj = double(j);
                r += e * std::cos(jj * phi);
                dr -= e * jj * std::sin(jj * phi);
                ddr -= e * jj * jj * std::cos(jj * phi);
            }
            r *= R, dr *= R, ddr *= R;
            double c = std::cos(phi), s = std::sin(phi);
            return {r * c, r * s, dr * c - r * s, dr * s + r * c, ddr * c - 2 * dr * s - r * c,
                    ddr * s + 2 * dr * c - r * s};
        }
        }
    }

    double speed(double phi) const {
        auto j = jet(phi);
        return std::hypot(j.dx, j.dy);
    }

    double curvature(double phi) const {
        auto j = jet(phi);
        double sp = std::hypot(j.dx, j.dy);
        return (j.dx * j.ddy - j.dy * j.ddx) / (sp * sp * sp);
    }

  private:
    static CurveSpec make(CurveKind k, std::vector<double> p) {
        CurveSpec c{k, std::move(p)};
        c.validate();
        return c;
    }
};

struct CurveGeometry {
    CurveSpec spec;
    double L = 0; // half-length
    double area = 0;
    double gamma0 = 0;
    std::vector<double> s_samples, k_samples;
    std::vector<double> phi_samples, x_samples, y_samples;
    double turning_number = 0;

    // cumulative arc length from phi = 0 at the panel ends 2 pi j / P
    std::vector<double> panel_arc;

    std::size_t size() const { return s_samples.size(); }

    double arc_between(double phi0, double phi1) const {
        static const std::array<double, 8> x = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                                0.7966664774136267,  0.9602898564975363};
        static const std::array<double, 8> w = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                0.2223810344533745, 0.1012285362903763};
        double c = 0.5 * (phi0 + phi1), r = 0.5 * (phi1 - phi0), s = 0;
        for (std::size_t i = 0; i < 8; ++i) s += w[i] * spec.speed(c + r * x[i]);
        return s * r;
    }

    // arc length from phi = 0 to phi in [0, 2 pi]
    double arc_of_phi(double phi) const {
        const std::size_t P = panel_arc.size() - 1;
        const double dphi = 2 * M_PI / double(P);
        std::size_t j = std::min(P - 1, std::size_t(std::max(0.0, std::floor(phi / dphi))));
        return panel_arc[j] + arc_between(double(j) * dphi, phi);
    }

    // inverse of arc_of_phi, s taken modulo 2L; returns phi in [0, 2 pi)
    double phi_of_s(double s) const {
        const double len = 2 * L;
        s = std::fmod(s, len);
        if (s < 0) s += len;
        const std::size_t P = panel_arc.size() - 1;
        const double dphi = 2 * M_PI / double(P);
        std::size_t j = std::size_t(std::upper_bound(panel_arc.begin(), panel_arc.end(), s) - panel_arc.begin());
        j = std::clamp<std::size_t>(j, 1, P) - 1;
        double lo = double(j) * dphi, hi = lo + dphi;
        double phi = lo + dphi * (s - panel_arc[j]) / (panel_arc[j + 1] - panel_arc[j]);
        for (int it = 0; it < 50; ++it) {
            double f = panel_arc[j] + arc_between(lo, phi) - s;
            double step = f / spec.speed(phi);
            double next = std::clamp(phi - step, lo, hi);
            if (std::abs(next - phi) < 1e-15) {
                phi = next;
                break;
            }
            phi = next;
        }
        return phi >= 2 * M_PI ? phi - 2 * M_PI : phi;
    }

    double curvature_at(double s) const { return spec.curvature(phi_of_s(s)); }
};

// Samples on s_i = -L + 2L i / N; s = 0 is the point phi = 0.
inline CurveGeometry curve_geometry(const CurveSpec& spec, std::size_t N) {
    spec.validate();
    require(N >= 64, "curve_geometry needs N >= 64 samples");
    CurveGeometry g;
    g.spec = spec;
    const std::size_t P = std::max<std::size_t>(N, 256);
    g.panel_arc.assign(P + 1, 0.0);
    const double dphi = 2 * M_PI / double(P);
    for (std::size_t j = 0; j < P; ++j)
        g.panel_arc[j + 1] = g.panel_arc[j] + g.arc_between(double(j) * dphi, double(j + 1) * dphi);
    g.L = 0.5 * g.panel_arc.back();

    // Green's formula, trapezoid in phi (spectral for periodic integrands)
    const std::size_t Q = 4 * P;
    double A = 0;
    for (std::size_t j = 0; j < Q; ++j) {
        auto jt = spec.jet(2 * M_PI * double(j) / double(Q));
        A += jt.x * jt.dy - jt.y * jt.dx;
    }
    g.area = 0.5 * A * 2 * M_PI / double(Q);
    g.gamma0 = g.area / (2 * g.L);

    g.s_samples.resize(N);
    g.k_samples.resize(N);
    g.phi_samples.resize(N);
    g.x_samples.resize(N);
    g.y_samples.resize(N);
    double turn = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double s = -g.L + 2 * g.L * double(i) / double(N);
        double phi = g.phi_of_s(s);
        auto jt = spec.jet(phi);
        g.s_samples[i] = s;
        g.phi_samples[i] = phi;
        g.k_samples[i] = spec.curvature(phi);
        g.x_samples[i] = jt.x;
        g.y_samples[i] = jt.y;
        turn += g.k_samples[i];
    }
    g.turning_number = turn * 2 * g.L / double(N) / (2 * M_PI);
    if (std::abs(g.turning_number - 1) > 1e-6 || g.area <= 0)
        throw InvalidInput("curve is not a simple counterclockwise closed curve (turning number " +
                           std::to_string(g.turning_number) + ")");
    return g;
}

struct CurvatureMax {
    double s_max = 0;
    double k_max = 0;
    double k_pp = 0;
    int multiplicity = 1; // number of sampled maxima within 1e-9 of the largest
};

// Location of the largest curvature. Curves with several equal maxima (the
// ellipse) are accepted with multiplicity > 1 unless strict; a constant
// curvature is always rejected.
inline CurvatureMax curvature_max(const CurveGeometry& g, bool strict = false) {
    const std::size_t N = g.size();
    const auto& k = g.k_samples;
    auto [mn, mx] = std::minmax_element(k.begin(), k.end());
    if (*mx - *mn <= 1e-9 * std::abs(*mx)) throw InvalidInput("curvature is constant: no unique maximum");
    std::vector<std::size_t> peaks;
    for (std::size_t i = 0; i < N; ++i) {
        double l = k[(i + N - 1) % N], r = k[(i + 1) % N];
        if (k[i] >= l && k[i] > r) peaks.push_back(i);
    }
    const double top = *mx;
    int mult = 0;
    std::size_t best = std::size_t(mx - k.begin());
    for (std::size_t i : peaks) {
        if (k[i] < top - 1e-9) continue;
        ++mult;
        if (std::abs(g.s_samples[i]) < std::abs(g.s_samples[best])) best = i;
    }
    if (strict && mult > 1) throw InvalidInput("curvature maximum is not unique");

    // parabolic step, then golden section on the exact curvature
    const double ds = 2 * g.L / double(N);
    double km = k[(best + N - 1) % N], k0 = k[best], kp = k[(best + 1) % N];
    double den = km - 2 * k0 + kp;
    double s0 = g.s_samples[best] + (den < 0 ? 0.5 * ds * (km - kp) / den : 0.0);
    double lo = s0 - ds, hi = s0 + ds;
    const double gr = (std::sqrt(5.0) - 1) / 2;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = g.curvature_at(x1), f2 = g.curvature_at(x2);
    while (hi - lo > 1e-10 * std::max(1.0, g.L)) {
        if (f1 > f2) {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - gr * (hi - lo), f1 = g.curvature_at(x1);
        } else {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + gr * (hi - lo), f2 = g.curvature_at(x2);
        }
    }
    CurvatureMax c;
    c.s_max = 0.5 * (lo + hi);
    if (c.s_max >= g.L) c.s_max -= 2 * g.L;
    if (c.s_max < -g.L) c.s_max += 2 * g.L;
    c.k_max = g.curvature_at(c.s_max);
    const double hs = 1e-3 * std::min(1.0, g.L);
    double v[5];
    for (int i = -2; i <= 2; ++i) v[i + 2] = g.curvature_at(c.s_max + i * hs);
    c.k_pp = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * hs * hs);
    c.multiplicity = mult;
    if (!(c.k_pp < 0)) throw NumericalError("curvature maximum is degenerate (k'' >= 0)");
    return c;
}

struct FluxOffsets {
    double hbar = 0;
    double theta = 0;
    long long m_index = 0;
    double alpha_h = NAN;
    double gamma0 = 0;
    double L = 0;
};

// theta = gamma0/hbar - m pi hbar / L with m chosen so that theta lies in [0, hbar pi / L).
inline FluxOffsets flux_offsets(double gamma0, double L, double h, std::optional<double> sigma_m1 = std::nullopt) {
    require(h > 0 && std::isfinite(h), "h must be positive");
    require(L > 0 && std::isfinite(gamma0), "need L > 0 and finite gamma0");
    FluxOffsets f;
    f.hbar = std::sqrt(h);
    f.gamma0 = gamma0;
    f.L = L;
    const double period = f.hbar * M_PI / L;
    const double x = gamma0 * L / (M_PI * h);
    const double m = std::floor(x);
    f.m_index = static_cast<long long>(m);
    f.theta = (x - m) * period;
    if (f.theta >= period) f.theta = 0, ++f.m_index;
    if (sigma_m1) f.alpha_h = 2 * L * gamma0 / (2 * L * h) - *sigma_m1 / f.hbar;
    return f;
}

inline FluxOffsets flux_offsets(const CurveGeometry& g, double h, std::optional<double> sigma_m1 = std::nullopt) {
    return flux_offsets(g.gamma0, g.L, h, sigma_m1);
}

} // namespace edgespec

#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "edgespec/moments.hpp"
#include "edgespec/quantize.hpp"

using namespace edgespec;

namespace {

const BandMinimum& minimum(double a) {
    static std::map<double, BandMinimum> cache;
    auto it = cache.find(a);
    if (it == cache.end()) it = cache.emplace(a, band_minimum(a)).first;
    return it->second;
}

const SymbolCoefficients& coeffs(double a) {
    static std::map<double, SymbolCoefficients> cache;
    auto it = cache.find(a);
    if (it == cache.end()) it = cache.emplace(a, symbol_coefficients(minimum(a))).first;
    return it->second;
}

const CurveGeometry& ellipse() {
    static CurveGeometry g = curve_geometry(CurveSpec::ellipse(1.0, 0.6), 512);
    return g;
}

} // namespace

TEST(Quantize, CircleClosedForm) {
    auto geom = curve_geometry(CurveSpec::circle(1.0), 256);
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), geom);
    const double hbar = 0.05, theta = 0.013;
    auto op = quantize_reduced(rs, geom.L, hbar, theta, 40);
    auto sp = spectrum_lowest(op, 10);
    const double c1 = rs.c1_samples[0], lin = rs.lin_samples[0], quad = rs.quad_samples[0];
    std::vector<double> want;
    for (Eigen::Index i = 0; i < op.order(); ++i) {
        double x = hbar * M_PI * double(op.mode(i)) / geom.L + theta - rs.sigma_a - hbar * c1;
        want.push_back(0.5 * rs.mu_pp * x * x - hbar * lin - hbar * hbar * quad);
    }
    std::sort(want.begin(), want.end());
    for (int n = 0; n < 10; ++n) EXPECT_NEAR(sp.eigenvalues[n], want[n], 1e-12);
}

TEST(Quantize, GaugePeriodicity) {
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), ellipse());
    const double hbar = 0.02, L = ellipse().L;
    auto a = spectrum_lowest(quantize_reduced(rs, L, hbar, 0.0037, 60), 8);
    auto b = spectrum_lowest(quantize_reduced(rs, L, hbar, 0.0037 + hbar * M_PI / L, 60), 8);
    for (int n = 0; n < 8; ++n) EXPECT_NEAR(a.eigenvalues[n], b.eigenvalues[n], 1e-10);
}

TEST(Quantize, HermitianAndCurvatureLowersEnergy) {
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), ellipse());
    const double hbar = 0.02;
    auto fo = flux_offsets(ellipse(), hbar * hbar);
    auto op = quantize_reduced(rs, ellipse().L, hbar, fo.theta, 60);
    auto sp = spectrum_lowest(op, 1);
    EXPECT_LT(sp.hermiticity_residual, 1e-13);
    EXPECT_LT(sp.eigenvalues[0], 0.0);
    EXPECT_LT(sp.truncation_mass, 1e-10);
}

TEST(Quantize, TruncationOracle) {
    auto geom = curve_geometry(CurveSpec::ellipse(1.0, 0.6), 1024);
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), geom);
    const double hbar = 0.01;
    auto fo = flux_offsets(geom, hbar * hbar);
    auto a = spectrum_lowest(quantize_reduced(rs, geom.L, hbar, fo.theta, 60), 6);
    auto b = spectrum_lowest(quantize_reduced(rs, geom.L, hbar, fo.theta, 120), 6);
    for (int n = 0; n < 6; ++n) EXPECT_NEAR(a.eigenvalues[n], b.eigenvalues[n], 1e-10);
}

TEST(Quantize, AliasingRejected) {
    auto geom = curve_geometry(CurveSpec::ellipse(1.0, 0.6), 128);
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), geom);
    EXPECT_THROW(quantize_reduced(rs, geom.L, 0.01, 0.0, 40), InvalidInput);
}

TEST(Quantize, CountBelowEnergy) {
    auto rs = reduced_symbol(minimum(-0.5), coeffs(-0.5), ellipse());
    auto op = quantize_reduced(rs, ellipse().L, 0.02, 0.0, 40);
    auto sp = spectrum_lowest(op, 5, 0.0);
    ASSERT_TRUE(sp.count_below_E.has_value());
    long expect = long(std::count_if(sp.eigenvalues.begin(), sp.eigenvalues.end(), [](double v) { return v <= 0.0; }));
    EXPECT_GE(*sp.count_below_E, expect);
}

TEST(Harmonic, Homogeneity) {
    auto cm = curvature_max(ellipse());
    double C = coeffs(-0.5).g1;
    const auto& m = minimum(-0.5);
    auto p1 = harmonic_prediction(m, cm, C, 1e-3, 1), p2 = harmonic_prediction(m, cm, C, 2e-3, 1);
    double first1 = p1.reduced - 0.5 * p1.level_gap, first2 = p2.reduced - 0.5 * p2.level_gap;
    EXPECT_DOUBLE_EQ(first2 / first1, 2.0);
    auto q2 = harmonic_prediction(m, cm, C, 1e-3, 2);
    EXPECT_NEAR(q2.reduced - p1.reduced, std::pow(1e-3, 1.5) * std::sqrt(-C * m.mu_pp * cm.k_pp), 1e-15);
}

TEST(Harmonic, OscillatorRederivation) {
    // A D^2 + B s^2 has levels (2n - 1) sqrt(A B)
    auto cm = curvature_max(ellipse());
    double C = coeffs(-0.5).g1, mpp = minimum(-0.5).mu_pp, hbar = 1e-3;
    double A = 0.5 * mpp * hbar * hbar, B = 0.5 * hbar * C * std::abs(cm.k_pp);
    for (int n = 1; n <= 3; ++n) {
        auto p = harmonic_prediction(minimum(-0.5), cm, C, hbar, n);
        EXPECT_NEAR((2 * n - 1) * std::sqrt(A * B), (n - 0.5) * p.level_gap, 1e-15);
    }
}

TEST(Harmonic, FullOperatorForm) {
    auto cm = curvature_max(ellipse());
    double C = coeffs(-0.5).g1, hbar = 1e-2, h = hbar * hbar;
    const auto& m = minimum(-0.5);
    auto p = harmonic_prediction(m, cm, C, hbar, 1);
    EXPECT_NEAR(p.full, m.beta_a * h + h * p.reduced, 1e-15);
}

TEST(Harmonic, RejectsHypothesisViolations) {
    CurvatureMax bad{0.0, 1.0, 0.5, 1};
    EXPECT_THROW(harmonic_prediction(minimum(-0.5), bad, 0.03, 1e-3, 1), InvalidInput);
    EXPECT_THROW(harmonic_prediction(minimum(-0.5), curvature_max(ellipse()), 0.0, 1e-3, 1), InvalidInput);
}

TEST(MinusOne, CircleClosedForm) {
    auto geom = curve_geometry(CurveSpec::circle(1.0), 256);
    const double C0 = -0.065, mpp = 1.17, alpha = 12.3456;
    auto sp = spectrum_lowest(a_minus1_operator(geom, alpha, C0, mpp, 40), 8);
    std::vector<double> want;
    auto op = a_minus1_operator(geom, alpha, C0, mpp, 40);
    for (Eigen::Index i = 0; i < op.order(); ++i) {
        double x = M_PI * double(op.mode(i)) / geom.L + alpha;
        want.push_back(0.5 * mpp * x * x + C0);
    }
    std::sort(want.begin(), want.end());
    for (int n = 0; n < 8; ++n) EXPECT_NEAR(sp.eigenvalues[n], want[n], 1e-10);
}

TEST(MinusOne, AlphaPeriodicity) {
    auto a = spectrum_lowest(a_minus1_operator(ellipse(), 3.21, -0.065, 1.17, 60), 8);
    auto b = spectrum_lowest(a_minus1_operator(ellipse(), 3.21 + M_PI / ellipse().L, -0.065, 1.17, 60), 8);
    for (int n = 0; n < 8; ++n) EXPECT_NEAR(a.eigenvalues[n], b.eigenvalues[n], 1e-10);
}

TEST(MinusOne, CrossRouteIdentity) {
    const auto& m = minimum(-1.0);
    auto rs = reduced_symbol(m, coeffs(-1.0), ellipse());
    auto dg = degennes();
    double C0 = -0.25 - 0.5 * constant_G(dg).G_direct;
    for (double hbar : {1e-2, 5e-3}) {
        double h = hbar * hbar;
        auto fo = flux_offsets(ellipse(), h, dg.xi0);
        auto lam = spectrum_lowest(quantize_reduced(rs, ellipse().L, hbar, fo.theta, 60), 5);
        auto gam = spectrum_lowest(a_minus1_operator(ellipse(), fo.alpha_h, C0, m.mu_pp, 60), 5);
        for (int n = 0; n < 5; ++n) EXPECT_NEAR(lam.eigenvalues[n] / h, gam.eigenvalues[n], 1e-6) << hbar << " " << n;
    }
}

TEST(Weyl, CountNearPrediction) {
    const auto& m = minimum(-0.5);
    auto circ = curve_geometry(CurveSpec::circle(1.0), 256);
    double E = (m.beta_a + 0.5) / 2;
    auto w = weyl_count(m, circ, E, 1e-4);
    EXPECT_GE(w.prediction, 40.0);
    EXPECT_LE(std::abs(double(w.count) - w.prediction), 2.0);
}

TEST(Weyl, PredictionScaling) {
    const auto& m = minimum(-0.5);
    auto circ = curve_geometry(CurveSpec::circle(1.0), 256);
    double E = (m.beta_a + 0.5) / 2;
    auto a = weyl_count(m, circ, E, 1e-4), b = weyl_count(m, circ, E, 2.5e-5);
    EXPECT_NEAR(b.prediction / a.prediction, 2.0, 1e-12);
}

TEST(Weyl, MonotoneInEnergy) {
    const auto& m = minimum(-0.5);
    auto circ = curve_geometry(CurveSpec::circle(1.0), 256);
    long last = -1;
    for (double E : {0.40, 0.42, 0.45, 0.48}) {
        auto w = weyl_count(m, circ, E, 1e-4);
        EXPECT_GE(w.count, last);
        last = w.count;
    }
    EXPECT_THROW(weyl_count(m, circ, 0.6, 1e-4), InvalidInput);
}

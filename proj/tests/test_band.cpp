#include <cmath>

#include <gtest/gtest.h>

#include "edgespec/band.hpp"

using namespace edgespec;

namespace {

// Published de Gennes constants (Bonnaillie-Noel 2012), used as frozen oracles.
constexpr double kTheta0 = 0.590106125;
constexpr double kXi0 = 0.76818365;

const BandMinimum& min_half() {
    static BandMinimum m = band_minimum(-0.5);
    return m;
}

} // namespace

TEST(Assemble, HarmonicWhenAIsOne) {
    auto g = TransverseGrid::make(6.0, 0.1);
    auto T = assemble_transverse(1.0, 0.7, g);
    for (std::size_t j = 0; j < T.size(); ++j) {
        double t = g.t(j + 1);
        EXPECT_NEAR(T.rowsum[j] - (j == 0 || j + 1 == T.size() ? 1 / (g.spacing * g.spacing) : 0), (0.7 - t) * (0.7 - t), 1e-12);
    }
}

TEST(Assemble, PotentialAtZeroIsSigmaSquared) {
    auto g = TransverseGrid::make(6.0, 0.1);
    for (double a : {-1.0, -0.3, 1.0}) {
        auto T = assemble_transverse(a, 0.0, g);
        EXPECT_EQ(T.rowsum[g.half() - 1], 0.0);
        auto U = assemble_transverse(a, 1.5, g);
        EXPECT_NEAR(U.rowsum[g.half() - 1], 2.25, 1e-15);
    }
}

TEST(Assemble, EvenPotentialAtMinusOne) {
    auto g = TransverseGrid::make(8.0, 0.05);
    auto T = assemble_transverse(-1.0, 2.0, g);
    const std::size_t n = T.size();
    for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(T.diag[j], T.diag[n - 1 - j]);
}

TEST(Grid, NodeAtZeroAndCoarsening) {
    auto g = TransverseGrid::make(14.3, 1.0 / 400);
    EXPECT_EQ(g.t(g.half()), 0.0);
    EXPECT_LE(g.spacing, 1.0 / 400 + 1e-15);
    auto c = g.coarsened();
    EXPECT_NEAR(c.spacing, 2 * g.spacing, 1e-15);
    EXPECT_EQ(c.T, g.T);
}

TEST(BandValue, HarmonicOscillator) {
    EXPECT_NEAR(band_value(1.0, 0.0, 1).mu, 1.0, 1e-7);
    EXPECT_NEAR(band_value(1.0, 0.0, 2).mu, 3.0, 1e-7);
}

TEST(BandValue, DeGennesPoint) {
    auto p = band_value(-1.0, kXi0, 1);
    EXPECT_NEAR(p.mu, kTheta0, 1e-7);
    EXPECT_LE(p.error_estimate, 1e-8);
    ASSERT_TRUE(p.groundstate.has_value());
}

TEST(BandValue, LargeSigmaLimit) { EXPECT_NEAR(band_value(-0.5, 10.0, 1).mu, 0.5, 1e-3); }

TEST(BandValue, RichardsonErrorEstimate) {
    for (double s : {-1.0, 0.3, 0.66, 2.0}) EXPECT_LE(band_value(-0.5, s, 1).error_estimate, 1e-8) << s;
}

TEST(BandValue, TruncationCheckFires) {
    auto g = TransverseGrid::make(3.0, 1.0 / 100);
    EXPECT_THROW(band_value(-0.5, 0.66, 1, g), NumericalError);
}

TEST(BandMinimum, MinusOneIsDeGennes) {
    auto m = band_minimum(-1.0);
    EXPECT_NEAR(m.beta_a, 0.59, 5e-3);
    EXPECT_NEAR(m.beta_a, kTheta0, 1e-8);
    EXPECT_NEAR(m.sigma_a, kXi0, 1e-7);
    EXPECT_NEAR(m.sigma_a * m.sigma_a, m.beta_a, 1e-8);
    EXPECT_GT(m.mu_pp, 0);
}

TEST(BandMinimum, HalfIsInsideWindow) {
    const auto& m = min_half();
    EXPECT_GT(m.beta_a, 0);
    EXPECT_LT(m.beta_a, 0.5);
    EXPECT_GT(m.sigma_a, 0);
    EXPECT_GT(m.mu_pp, 0);
    EXPECT_LE(std::abs(m.dmu_at_min), 1e-10);
}

TEST(BandMinimum, BruteForceScan) {
    const auto& m = min_half();
    auto g = default_grid(-0.5, 1.0, 1.0 / 200);
    double best = INFINITY, arg = 0;
    for (double s = m.sigma_a - 0.02; s <= m.sigma_a + 0.02; s += 1e-4) {
        double mu = solve_level(-0.5, s, 1, g).mu;
        if (mu < best) best = mu, arg = s;
    }
    EXPECT_NEAR(arg, m.sigma_a, 1e-3);
}

TEST(LevelSet, DegenerateAtMinimum) {
    const auto& m = min_half();
    auto [lo, hi] = band_level_set(-0.5, m.beta_a + 1e-12, m);
    EXPECT_NEAR(lo, m.sigma_a, 1e-4);
    EXPECT_NEAR(hi, m.sigma_a, 1e-4);
    EXPECT_LE(lo, hi);
}

TEST(LevelSet, RootsReevaluate) {
    auto m = band_minimum(-1.0);
    auto [lo, hi] = band_level_set(-1.0, 0.8, m);
    EXPECT_LT(lo, m.sigma_a);
    EXPECT_GT(hi, m.sigma_a);
    EXPECT_NEAR(band_value(-1.0, lo, 1).mu, 0.8, 1e-9);
    EXPECT_NEAR(band_value(-1.0, hi, 1).mu, 0.8, 1e-9);
}

TEST(LevelSet, Nesting) {
    const auto& m = min_half();
    auto [l1, h1] = band_level_set(-0.5, 0.42, m);
    auto [l2, h2] = band_level_set(-0.5, 0.46, m);
    EXPECT_LT(l2, l1);
    EXPECT_GT(h2, h1);
}

TEST(LevelSet, RejectsOutOfRange) {
    const auto& m = min_half();
    EXPECT_THROW(band_level_set(-0.5, 0.5, m), InvalidInput);
    EXPECT_THROW(band_level_set(-0.5, m.beta_a - 0.01, m), InvalidInput);
}

TEST(Invariants, SimplicityAndSecondBandBarrier) {
    // Beyond sigma(a)+2 the two wells decouple and both margins become
    // exponentially small, below the discretization error.
    for (double a : {-1.0, -0.5, -0.25}) {
        double top = band_minimum(a).sigma_a + 2.0;
        for (int i = 0; i < 50; ++i) {
            double s = -3.0 + (top + 3.0) * i / 49.0;
            auto g = default_grid(a, std::abs(s), 1.0 / 200);
            auto T = assemble_transverse(a, s, g);
            auto ev = tridiag_lowest(T, 2);
            EXPECT_GT(ev[1] - ev[0], 1e-6) << a << " " << s;
            EXPECT_GT(ev[1], std::abs(a) + 1e-6) << a << " " << s;
        }
    }
}

TEST(Invariants, Limits) {
    for (double a : {-1.0, -0.5, -0.25}) {
        EXPECT_GT(band_value(a, -5.0, 1).mu, 3.0);
        EXPECT_LT(std::abs(band_value(a, 25.0, 1).mu - std::abs(a)), 1e-2);
    }
}

TEST(Invariants, OscillationCounts) {
    for (double a : {-1.0, -0.5}) {
        auto g = default_grid(a, 1.0);
        for (int n = 1; n <= 4; ++n) {
            auto st = solve_level(a, 0.7, n, g);
            EXPECT_EQ(sign_changes(st.state), n - 1) << a << " " << n;
        }
    }
}

TEST(Invariants, GroundStateEvenAtMinusOne) {
    auto p = band_value(-1.0, kXi0, 1);
    const auto& u = *p.groundstate;
    const std::size_t N = u.size();
    for (std::size_t i = 0; i < N; ++i) EXPECT_NEAR(u[i], u[N - 1 - i], 1e-8);
    for (double x : u) EXPECT_GE(x, 0.0);
}

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "edgespec/moments.hpp"

using namespace edgespec;

namespace {

constexpr double kTheta0 = 0.590106125;

const DeGennesData& dg() {
    static DeGennesData d = degennes();
    return d;
}

const MomentSet& moments_at(double a) {
    static std::map<double, MomentSet> cache;
    auto it = cache.find(a);
    if (it == cache.end()) it = cache.emplace(a, moments(a, band_minimum(a))).first;
    return it->second;
}

} // namespace

TEST(Moments, FirstMomentVanishes) {
    for (double a : {-1.0, -0.75, -0.5, -0.25}) EXPECT_NEAR(moments_at(a).values[1], 0.0, 1e-7) << a;
}

TEST(Moments, SymmetricCaseVanishes) {
    const auto& m = moments_at(-1.0);
    EXPECT_NEAR(m.values[2], 0.0, 1e-7);
    EXPECT_NEAR(m.values[3], 0.0, 1e-7);
}

TEST(Moments, ThirdMomentNegative) { EXPECT_LT(moments_at(-0.5).values[3], 0.0); }

TEST(Moments, DerivativeAtEdgeNegative) {
    for (double a : {-0.75, -0.5, -0.25}) EXPECT_LT(moments_at(a).dphi0, 0.0) << a;
}

TEST(Moments, QuadratureErrorSmall) {
    for (double a : {-0.75, -0.5}) EXPECT_LE(moments_at(a).quadrature_error, 1e-9) << a;
}

TEST(Moments, RejectsSingularWeight) {
    BandMinimum bm;
    bm.a = 1e-7;
    EXPECT_THROW(moments(1e-7, bm, default_grid(-1.0, 1.0)), InvalidInput);
}

TEST(Moments, TrapezoidSplitOnGaussian) {
    // phi = exp(-t^2/2) with weight 1/b: int = sqrt(pi)/2 (1 + 1/a)
    auto g = TransverseGrid::make(10.0, 0.01);
    double a = -0.5;
    double s = detail::split_trapezoid(g, a, [&](std::size_t, double t, double b) { return std::exp(-t * t) / b; });
    EXPECT_NEAR(s, std::sqrt(M_PI) / 2 * (1 + 1 / a), 1e-12);
}

TEST(Identities, GatingResidualsSmall) {
    for (double a : {-1.0, -0.75, -0.5, -0.25}) {
        auto r = check_moment_identities(moments_at(a));
        EXPECT_LT(r.m1, 1e-6) << a;
        EXPECT_LT(r.m2, 1e-6) << a;
        EXPECT_LT(r.m3, 1e-6) << a;
        EXPECT_LT(r.iii, 1e-6) << a;
        EXPECT_LT(r.iv, 1e-6) << a;
        EXPECT_LT(r.sum, 1e-7) << a;
    }
}

TEST(Identities, SymmetricCaseThirdForm) { EXPECT_LT(check_moment_identities(moments_at(-1.0)).m3, 1e-7); }

TEST(Identities, AltFormsDisagreeAwayFromSymmetry) {
    // both alternative forms hold trivially at a = -1 and fail elsewhere
    auto r = check_moment_identities(moments_at(-0.5));
    EXPECT_GT(r.m2_alt, 1e-2);
    EXPECT_GT(r.m3_alt, 1e-2);
    EXPECT_LT(check_moment_identities(moments_at(-1.0)).m2_alt, 1e-7);
}

TEST(ConstantC, Values) {
    EXPECT_NEAR(-moments_at(-1.0).values[3], 0.0, 1e-7);
    EXPECT_GT(constant_C(moments_at(-0.5)), 0.0);
}

TEST(ConstantC, StableUnderGridHalving) {
    auto bm = band_minimum(-0.5);
    auto fine = moments(-0.5, bm, default_grid(-0.5, 3.0, 1.0 / 400));
    auto coarse = moments(-0.5, bm, default_grid(-0.5, 3.0, 1.0 / 200));
    EXPECT_NEAR(constant_C(fine), constant_C(coarse), 1e-6);
}

TEST(DeGennes, Constants) {
    const auto& d = dg();
    EXPECT_NEAR(d.Theta0, 0.59, 5e-3);
    EXPECT_NEAR(d.Theta0, kTheta0, 1e-8);
    EXPECT_NEAR(d.xi0 * d.xi0, d.Theta0, 1e-12);
    EXPECT_NEAR(d.sigma_min, d.xi0, 1e-8);
    EXPECT_LT(d.theta_convergence, 1e-6);
}

TEST(DeGennes, GroundStatePositive) {
    const auto& d = dg();
    EXPECT_GT(d.f0.front(), 0.0);
    EXPECT_EQ(sign_changes(d.f0), 0);
    EXPECT_EQ(d.f0.size(), d.K() + 1);
}

TEST(DeGennes, HalfMoments) {
    const auto& d = dg();
    const auto& M = d.halfmoments;
    EXPECT_NEAR(M[0], 1.0, 1e-9);
    EXPECT_NEAR(M[1], 0.0, 1e-7);
    EXPECT_NEAR(M[2], d.Theta0 / 2, 1e-6);
    EXPECT_NEAR(M[3], -d.f0_sq_at_0 / 6, 1e-6);
    EXPECT_NEAR(M[4], 0.375 * (1 + d.Theta0 * d.Theta0 + 6 * d.xi0 * M[3]), 1e-6);
}

TEST(DeGennes, MatchesFullLineAtMinusOne) {
    auto p = band_value(-1.0, dg().xi0, 1);
    EXPECT_NEAR(p.mu, dg().Theta0, 1e-9);
}

TEST(DeGennes, NeumannStencilOnPureCosine) {
    // sigma large: the well is far from the wall and mu -> 1
    auto st = detail::neumann_level(8.0, 4000, 20.0 / 4000);
    EXPECT_NEAR(st.mu, 1.0, 1e-5);
}

TEST(DeGennes, RejectsBadGrid) {
    EXPECT_THROW(degennes(8, 15.0), InvalidInput);
    EXPECT_THROW(degennes(4000, 5.0), InvalidInput);
}

TEST(ConstantG, AltFormsAgree) {
    auto G = constant_G(dg());
    EXPECT_NEAR(G.alt_form1, G.alt_form2, 1e-8);
    EXPECT_NEAR(G.corrected_form1, G.corrected_form2, 1e-8);
}

TEST(ConstantG, DirectRoutes) {
    auto G = constant_G(dg());
    EXPECT_LT(G.route_difference, 1e-8);
    EXPECT_NEAR(G.G_direct, G.G_direct_deflated, 1e-8);
    EXPECT_LT(G.direct_error, 1e-8);
    EXPECT_NEAR(G.G_direct, G.corrected_form1, 1e-4 * std::abs(G.corrected_form1));
    EXPECT_LT(G.G_direct, 0.0);
}

TEST(UniversalConstants, Signs) {
    auto u = universal_constants(moments_at(-0.5), constant_G(dg()));
    EXPECT_GT(u.C_of_a, 0.0);
    EXPECT_LT(u.G, 0.0);
    EXPECT_LT(u.C0, 0.0);
    EXPECT_LT(u.C0_alt, 0.0);
    EXPECT_NEAR(u.C0, 2.0 / 3 * dg().xi0 * dg().halfmoments[3], 1e-8);
}

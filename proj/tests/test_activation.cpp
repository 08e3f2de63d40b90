#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "projae/activation.hpp"

using namespace projae;

TEST(Hyperbolic, ParametersAtDefaultAngle) {
    const HyperbolicActivation act;
    const double al = std::numbers::pi / 8.0;
    const double s = std::sin(al), c = std::cos(al);
    EXPECT_DOUBLE_EQ(act.a(), 1.0 / (s * s) - 1.0 / (c * c));
    EXPECT_DOUBLE_EQ(act.b(), 1.0 / (s * s) + 1.0 / (c * c));
    EXPECT_GT(act.a(), 0.0);
    EXPECT_LT(act.a(), act.b());
}

TEST(Hyperbolic, ValuesAndSlopesAtZero) {
    const HyperbolicActivation act;
    EXPECT_NEAR(act.plus(0.0), 0.0, 1e-15);
    EXPECT_NEAR(act.minus(0.0), 0.0, 1e-15);
    EXPECT_NEAR(act.derivative(0.0, Branch::Plus, 1), 1.0, 1e-12);
    EXPECT_NEAR(act.derivative(0.0, Branch::Minus, 1), 1.0, 1e-12);
}

TEST(Hyperbolic, InversePair) {
    const HyperbolicActivation act;
    for (double x : {-10.0, -1.0, 0.3, 7.0}) EXPECT_NEAR(act.minus(act.plus(x)), x, 1e-12);
    for (int i = 0; i <= 1000; ++i) {
        const double x = -20.0 + 0.04 * i;
        EXPECT_NEAR(act.plus(act.minus(x)), x, 1e-11);
    }
    for (int i = 0; i <= 10000; ++i) {
        const double x = -50.0 + 0.01 * i;
        EXPECT_NEAR(act.minus(act.plus(x)), x, 1e-10 * std::max(1.0, std::abs(x)));
        EXPECT_NEAR(act.plus(act.minus(x)), x, 1e-10 * std::max(1.0, std::abs(x)));
    }
}

TEST(Hyperbolic, LargeArgumentsStayAccurate) {
    const HyperbolicActivation act;
    for (double x : {-1e12, -3e9, 2e9, 5e12}) {
        EXPECT_NEAR(act.minus(act.plus(x)) / x, 1.0, 1e-12);
        const double slope = act.plus(x) / x;
        EXPECT_NEAR(slope, x > 0 ? act.max_slope() : act.min_slope(), 1e-6);
    }
}

TEST(Hyperbolic, DerivativesMatchFiniteDifferences) {
    const HyperbolicActivation act;
    for (Branch br : {Branch::Plus, Branch::Minus})
        for (int i = 0; i <= 100; ++i) {
            const double x = -5.0 + 0.1 * i;
            const double d1 = oracle::central_diff([&](double t) { return act.eval(t, br); }, x, 1e-5);
            const double d2 = oracle::central_diff([&](double t) { return act.derivative(t, br, 1); }, x, 1e-5);
            EXPECT_NEAR(act.derivative(x, br, 1), d1, 1e-6 * std::max(1.0, std::abs(d1)));
            EXPECT_NEAR(act.derivative(x, br, 2), d2, 1e-6 * std::max(1.0, std::abs(d2)));
        }
}

TEST(Hyperbolic, ChainIdentityAndCurvature) {
    const HyperbolicActivation act;
    for (int i = 0; i <= 400; ++i) {
        const double x = -50.0 + 0.25 * i;
        EXPECT_NEAR(act.derivative(act.plus(x), Branch::Minus, 1) * act.derivative(x, Branch::Plus, 1), 1.0, 1e-10);
        EXPECT_GT(act.derivative(x, Branch::Plus, 2), 0.0);
        EXPECT_LT(act.derivative(x, Branch::Minus, 2), 0.0);
        for (Branch br : {Branch::Plus, Branch::Minus}) {
            const double s = act.derivative(x, br, 1);
            EXPECT_GE(s, act.min_slope() - 1e-12);
            EXPECT_LE(s, act.max_slope() + 1e-12);
        }
    }
    EXPECT_NEAR(act.min_slope(), std::tan(std::numbers::pi / 4 - act.alpha()), 1e-14);
    EXPECT_NEAR(act.max_slope(), std::tan(std::numbers::pi / 4 + act.alpha()), 1e-14);
}

TEST(Hyperbolic, BranchesAreReflectionsButNotOdd) {
    const HyperbolicActivation act;
    for (double x : {-4.0, -1.5, 0.2, 1.5, 9.0}) {
        EXPECT_NEAR(act.minus(x), -act.plus(-x), 1e-13);
        EXPECT_GT(std::abs(act.plus(x) + act.plus(-x)), 1e-3);
    }
}

TEST(Gelu, ZeroAndDerivatives) {
    EXPECT_EQ(gelu(0.0, 0), 0.0);
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
        EXPECT_NEAR(gelu(x, 1), oracle::central_diff([](double t) { return gelu(t, 0); }, x, 1e-5), 1e-8);
        EXPECT_NEAR(gelu(x, 2), oracle::central_diff([](double t) { return gelu(t, 1); }, x, 1e-5), 1e-8);
    }
}

TEST(Activation, ApplyIsElementwise) {
    Activation act;
    const Mat x = oracle::gaussian(3, 4, 2);
    const Mat y = act.apply(x, Branch::Plus, 0);
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 4; ++j) EXPECT_EQ(y(i, j), act.hyp.plus(x(i, j)));
    Activation id{ActKind::Identity};
    EXPECT_EQ(id.apply(x, Branch::Minus, 0), x);
    EXPECT_EQ(id.apply(x, Branch::Minus, 1), Mat::Ones(3, 4));
}

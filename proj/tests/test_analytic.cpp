#include <gtest/gtest.h>

#include <cmath>

#include "hedgelab/analytic.hpp"
#include "oracles.hpp"

using namespace hedgelab;

namespace {
const OptionSpec kAtm{100.0, 1.0, ExerciseStyle::american};
const OptionSpec kAtmEuro{100.0, 1.0, ExerciseStyle::european};
}  // namespace

TEST(BsPut, IntrinsicAtExpiry) {
    EXPECT_DOUBLE_EQ(bs_put_price(150, kAtmEuro, 0.2, 0.05, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(bs_put_price(80, kAtmEuro, 0.2, 0.05, 0.0), 20.0);
}

TEST(BsPut, AtTheMoneyMatchesIntegralOracle) {
    const double v = bs_put_price(100, kAtmEuro, 0.2, 0.05, 1.0);
    EXPECT_NEAR(v, oracle::european_put_integral(100, 100, 0.2, 0.05, 1.0), 1e-4);
    EXPECT_NEAR(v, 5.57, 0.005);
}

TEST(BsPut, DeepOutOfTheMoney) { EXPECT_LT(bs_put_price(1e6, kAtmEuro, 0.2, 0.05, 1.0), 1e-8); }

TEST(BsPut, RejectsNegativeTau) { EXPECT_THROW(bs_put_price(100, kAtmEuro, 0.2, 0.05, -0.1), std::invalid_argument); }

TEST(BsPut, MonotoneInSpotAndStrike) {
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const double s = 60 + 4.0 * i, k = 60 + 4.0 * j;
            const OptionSpec spec{k, 1.0, ExerciseStyle::european};
            const OptionSpec next_k{k + 4.0, 1.0, ExerciseStyle::european};
            EXPECT_GE(bs_put_price(s, spec, 0.2, 0.05, 1.0) + 1e-12, bs_put_price(s + 4.0, spec, 0.2, 0.05, 1.0));
            EXPECT_LE(bs_put_price(s, spec, 0.2, 0.05, 1.0), bs_put_price(s, next_k, 0.2, 0.05, 1.0) + 1e-12);
        }
}

TEST(BsDelta, MatchesFiniteDifference) {
    const double h = 1e-4;
    for (double s : {70.0, 90.0, 100.0, 115.0, 140.0}) {
        const double fd = (bs_put_price(s + h, kAtmEuro, 0.2, 0.05, 1.0) - bs_put_price(s - h, kAtmEuro, 0.2, 0.05, 1.0)) / (2 * h);
        EXPECT_NEAR(bs_put_delta(s, kAtmEuro, 0.2, 0.05, 1.0), fd, 1e-6) << s;
    }
    EXPECT_NEAR(bs_put_delta(100, kAtmEuro, 0.2, 0.05, 1.0), -0.363, 0.0005);
}

TEST(BsDelta, Limits) {
    EXPECT_NEAR(bs_put_delta(1e-6, kAtmEuro, 0.2, 0.05, 1.0), -1.0, 1e-6);
    EXPECT_NEAR(bs_put_delta(1000, kAtmEuro, 0.2, 0.05, 1.0), 0.0, 1e-6);
    EXPECT_THROW(bs_put_delta(100, kAtmEuro, 0.2, 0.05, 0.0), std::invalid_argument);
}

TEST(Tree, TerminalLayerIsPayoff) {
    const auto tree = build_tree(kAtm, 100, 0.2, 0.05, 200);
    EXPECT_NEAR(tree.up * tree.down, 1.0, 1e-15);
    const auto& last = tree.prices.back();
    for (std::size_t j = 0; j < last.size(); ++j) EXPECT_DOUBLE_EQ(tree.values.back()[j], std::max(100.0 - last[j], 0.0));
}

TEST(Tree, AmericanDominatesEuropeanAndIntrinsic) {
    const auto am = build_tree(kAtm, 100, 0.2, 0.05, 500);
    const auto eu = build_tree(kAtmEuro, 100, 0.2, 0.05, 500);
    EXPECT_GT(am.root(), eu.root());
    for (std::size_t i = 0; i < am.values.size(); ++i)
        for (std::size_t j = 0; j < am.values[i].size(); ++j) {
            EXPECT_GE(am.values[i][j], std::max(100.0 - am.prices[i][j], 0.0) - 1e-12);
            EXPECT_GE(am.values[i][j], eu.values[i][j] - 1e-12);
        }
}

TEST(Tree, EuropeanConvergesToClosedForm) {
    const auto eu = build_tree(kAtmEuro, 100, 0.2, 0.05, 2000);
    EXPECT_NEAR(eu.root(), bs_put_price(100, kAtmEuro, 0.2, 0.05, 1.0), 2e-3);
}

TEST(Tree, AmericanRootMatchesRichardsonOracle) {
    const double v = build_tree(kAtm, 100, 0.2, 0.05, 2000).root();
    EXPECT_GE(v, 6.0);
    EXPECT_LE(v, 6.1);
    EXPECT_NEAR(v, oracle::american_put_richardson(100, 100, 0.2, 0.05, 1.0, 5000), 2e-3);
}

TEST(Tree, RootConverges) {
    const auto root = [](int n) { return build_tree(kAtm, 100, 0.2, 0.05, n).root(); };
    const double d1 = std::abs(root(250) - root(500));
    const double d2 = std::abs(root(500) - root(1000));
    const double d3 = std::abs(root(1000) - root(2000));
    EXPECT_GT(d1, d2);
    EXPECT_GT(d2, d3);
}

TEST(TreeQuery, NodeRootAndTerminal) {
    const auto tree = build_tree(kAtm, 100, 0.2, 0.05, 100);
    EXPECT_DOUBLE_EQ(tree_price_at(tree, 100, 0.0), tree.root());
    EXPECT_NEAR(tree_price_at(tree, tree.prices[40][10], 40 * tree.dt), tree.values[40][10], 1e-12);
    EXPECT_NEAR(tree_price_at(tree, 90.0, 1.0), 10.0, 1e-9);
    EXPECT_NEAR(tree_price_at(tree, 110.0, 1.0), 0.0, 1e-9);
    EXPECT_THROW(tree_price_at(tree, 100, 1.5), std::invalid_argument);
    EXPECT_THROW(tree_price_at(tree, 100, -0.1), std::invalid_argument);
}

TEST(TreeQuery, DeltaLimitsAndAtmDominance) {
    const auto tree = build_tree(kAtm, 100, 0.2, 0.05, 1000);
    EXPECT_NEAR(tree_delta(tree, 20, 0.5), -1.0, 1e-6);
    EXPECT_NEAR(tree_delta(tree, 500, 0.5), 0.0, 1e-6);
    const double euro = bs_put_delta(100, kAtmEuro, 0.2, 0.05, 1.0);
    EXPECT_LT(tree_delta(tree, 100, 0.0), euro);
    EXPECT_NEAR(tree_delta(build_tree(kAtm, 100, 0.2, 0.05, 1000), 20, 0.0), -1.0, 1e-6);
}

TEST(TreeBoundary, BelowStrikeNondecreasingReachesStrike) {
    const auto tree = build_tree(kAtm, 100, 0.2, 0.05, 1000);
    const auto b = tree_exercise_boundary(tree);
    std::optional<double> prev;
    for (const auto& p : b) {
        if (!p.critical_price) continue;
        EXPECT_LE(*p.critical_price, 100.0);
        const double spacing = *p.critical_price * (tree.up * tree.up - 1.0);
        if (prev) {
            EXPECT_GE(*p.critical_price, *prev - spacing) << p.t;
        }
        prev = p.critical_price;
    }
    ASSERT_TRUE(b.back().critical_price);
    EXPECT_NEAR(*b.back().critical_price, 100.0, 100.0 * (tree.up * tree.up - 1.0));
    EXPECT_THROW(tree_exercise_boundary(build_tree(kAtmEuro, 100, 0.2, 0.05, 10)), std::invalid_argument);
}

#include <gtest/gtest.h>

#include <cmath>

#include "hedgelab/simplex.hpp"

using namespace hedgelab;

namespace {
const Bounds kBox{{0.01, 0.0, -0.99}, {2.0, 3.0, 0.99}};
const std::vector<double> kTarget{0.3, 1.2, -0.4};

double bowl(const std::vector<double>& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - kTarget[i]) * (x[i] - kTarget[i]);
    return s;
}
}  // namespace

TEST(Simplex, RecoversQuadraticMinimum) {
    SimplexOptions opt;
    opt.tolerance = 1e-7;
    opt.value_spread = 1e-14;
    opt.max_iters = 2000;
    const auto r = simplex_search(bowl, {1.0, 0.5, 0.5}, kBox, opt);
    EXPECT_TRUE(r.converged);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.x[i], kTarget[i], 1e-4);
}

TEST(Simplex, StartAtMinimumNeverImproves) {
    const auto r = simplex_search(bowl, kTarget, kBox);
    EXPECT_EQ(r.improvements, 0);
    EXPECT_EQ(r.x, kTarget);
    EXPECT_DOUBLE_EQ(r.value, 0.0);
}

TEST(Simplex, NeverEvaluatesOutsideBounds) {
    bool outside = false;
    // unconstrained minimum lies beyond every upper bound
    const auto f = [&](const std::vector<double>& x) {
        if (!kBox.contains(x)) outside = true;
        return -x[0] - x[1] - x[2];
    };
    const auto r = simplex_search(f, {5.0, -1.0, 0.0}, kBox);
    EXPECT_FALSE(outside);
    EXPECT_NEAR(r.x[0], 2.0, 1e-3);
    EXPECT_NEAR(r.x[1], 3.0, 1e-3);
    EXPECT_NEAR(r.x[2], 0.99, 1e-3);
}

TEST(Simplex, IterationLimitReportsNotConverged) {
    SimplexOptions opt;
    opt.max_iters = 3;
    const auto r = simplex_search(bowl, {1.5, 2.5, 0.9}, kBox, opt);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_LE(r.value, bowl({1.5, 2.5, 0.9}));
}

TEST(Simplex, NonFiniteValuesAreRejectedMoves) {
    const auto f = [](const std::vector<double>& x) { return x[0] > 1.0 ? std::nan("") : bowl(x); };
    const auto r = simplex_search(f, {0.9, 1.0, 0.0}, kBox);
    EXPECT_NEAR(r.x[0], 0.3, 1e-2);
}

TEST(Simplex, RejectsBadArguments) {
    EXPECT_THROW(simplex_search(bowl, {1.0, 1.0}, kBox), std::invalid_argument);
    EXPECT_THROW(simplex_search(bowl, {1.0}, Bounds{{1.0}, {0.0}}), std::invalid_argument);
}

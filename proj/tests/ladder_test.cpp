#include <gtest/gtest.h>

#include <random>

#include "vpcb/ladder.hpp"

using namespace vpcb;

namespace {

TEST(JndLadder, ToyModelReproducesClippedTargets) {
    // quality(qp) = 100 - 0.4 qp, jnd 6, floor 82, 5 points:
    // targets {100, 95.5, 91, 86.5, 82} -> qps {0, 11, 23, 34, 45}.
    auto quality = [](int qp) { return 100.0 - 0.4 * qp; };
    LadderSearchResult r = build_jnd_ladder(0, 63, quality, 6.0, 82.0, 5);
    EXPECT_EQ(r.rate_params, (std::vector<int>{0, 11, 23, 34, 45}));
    ASSERT_EQ(r.targets.size(), 5u);
    EXPECT_DOUBLE_EQ(r.targets[0], 100.0);
    EXPECT_DOUBLE_EQ(r.targets[1], 95.5);
    EXPECT_DOUBLE_EQ(r.targets[2], 91.0);
    EXPECT_DOUBLE_EQ(r.targets[3], 86.5);
    EXPECT_DOUBLE_EQ(r.targets[4], 82.0);
    EXPECT_FALSE(r.monotonicity_warning);
}

TEST(JndLadder, TwoPointsWithOversizedJndClipToFloor) {
    auto quality = [](int qp) { return 100.0 - 0.4 * qp; };
    LadderSearchResult r = build_jnd_ladder(0, 63, quality, 50.0, 82.0, 2);
    ASSERT_EQ(r.targets.size(), 2u);
    EXPECT_DOUBLE_EQ(r.targets[0], 100.0);
    EXPECT_DOUBLE_EQ(r.targets[1], 82.0);
}

TEST(JndLadder, ConstantQualityDeduplicatesToOnePoint) {
    auto quality = [](int) { return 95.0; };
    LadderSearchResult r = build_jnd_ladder(0, 63, quality, 6.0, 82.0, 5);
    EXPECT_EQ(r.rate_params, (std::vector<int>{63}));
}

TEST(JndLadder, UnreachableFloorThrows) {
    auto quality = [](int qp) { return 70.0 - 0.1 * qp; };
    EXPECT_THROW(build_jnd_ladder(0, 63, quality, 6.0, 82.0, 5), UnreachableError);
}

TEST(JndLadder, NonMonotoneSamplesWarnButProceed) {
    auto quality = [](int qp) { return 85.0 + 0.1 * qp; };  // increasing: inverted endpoints
    LadderSearchResult r = build_jnd_ladder(0, 63, quality, 2.0, 82.0, 3);
    EXPECT_TRUE(r.monotonicity_warning);
    EXPECT_FALSE(r.rate_params.empty());
}

TEST(JndLadder, InputValidation) {
    auto quality = [](int) { return 90.0; };
    EXPECT_THROW(build_jnd_ladder(0, 63, quality, 6.0, 82.0, 1), RangeError);
    EXPECT_THROW(build_jnd_ladder(0, 63, quality, 0.0, 82.0, 5), RangeError);
    EXPECT_THROW(build_jnd_ladder(10, 5, quality, 6.0, 82.0, 5), RangeError);
}

TEST(JndLadder, PropertyOverRandomLinearModels) {
    // Slope <= 1 quality unit per rate step keeps the selection error <= 0.5.
    std::mt19937 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        double top = 90.0 + (rng() % 100) / 10.0;
        double slope = 0.1 + (rng() % 90) / 100.0;
        double floor_q = 82.0;
        int points = 2 + static_cast<int>(rng() % 5);
        double jnd = 1.0 + (rng() % 80) / 10.0;
        auto quality = [&](int qp) { return top - slope * qp; };

        LadderSearchResult r = build_jnd_ladder(0, 63, quality, jnd, floor_q, points);
        ASSERT_FALSE(r.rate_params.empty());
        for (size_t i = 1; i < r.rate_params.size(); ++i)
            ASSERT_LT(r.rate_params[i - 1], r.rate_params[i]);  // sorted, unique
        for (int p : r.rate_params) {
            ASSERT_GE(p, 0);
            ASSERT_LE(p, 63);
            ASSERT_GE(quality(p), floor_q - 0.5);
        }
        // Each chosen point sits within half a quality step of its target.
        for (size_t i = 0; i < r.targets.size(); ++i) {
            double best = 1e9;
            for (int p : r.rate_params) best = std::min(best, std::abs(quality(p) - r.targets[i]));
            double reachable = std::max(slope / 2.0, std::abs(quality(63) - r.targets[i]));
            ASSERT_LE(best, std::max(0.5, reachable) + 1e-9);
        }
    }
}

}  // namespace

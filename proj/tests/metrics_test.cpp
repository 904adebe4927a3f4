#include <gtest/gtest.h>

#include "oracle.hpp"
#include "vpcb/marker.hpp"
#include "vpcb/metrics.hpp"

using namespace vpcb;

namespace {

class RunnerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { dir_ = new std::filesystem::path(oracle::test_dir("metrics")); }
    static std::filesystem::path* dir_;
};
std::filesystem::path* RunnerTest::dir_ = nullptr;

TEST(PsnrFrame, IdenticalFramesHitTheCap) {
    auto f = oracle::random_frame({16, 16, 8, Chroma::C420}, 2);
    EXPECT_DOUBLE_EQ(psnr_frame(f, f), 99.0);
}

TEST(PsnrFrame, OffByOneEverywhereIs48Db) {
    FrameBuffer a(FrameFormat{16, 16, 8, Chroma::C420}, 100, 0);
    FrameBuffer b(FrameFormat{16, 16, 8, Chroma::C420}, 101, 0);
    EXPECT_NEAR(psnr_frame(a, b), 48.13, 0.005);  // 20 log10(255)
}

TEST(PsnrFrame, TenBitUnitMseIs60Db) {
    FrameBuffer a(FrameFormat{16, 16, 10, Chroma::C420}, 512, 0);
    FrameBuffer b(FrameFormat{16, 16, 10, Chroma::C420}, 513, 0);
    EXPECT_NEAR(psnr_frame(a, b), 60.20, 0.005);  // 20 log10(1023)
}

TEST(PsnrFrame, SpecMismatchRejected) {
    FrameBuffer a(FrameFormat{16, 16, 8, Chroma::C420});
    FrameBuffer b(FrameFormat{16, 8, 8, Chroma::C420});
    EXPECT_THROW(psnr_frame(a, b), DimensionError);
    FrameBuffer c(FrameFormat{16, 16, 10, Chroma::C420});
    EXPECT_THROW(psnr_frame(a, c), DimensionError);
}

TEST(PsnrFrame, RoiMaskRestrictsComparison) {
    FrameBuffer a(FrameFormat{16, 16, 8, Chroma::C420}, 100, 0);
    FrameBuffer b = a;
    b.luma(0, 0) = 200;  // damage outside the roi
    RegionMask roi = RegionMask::region({8, 8, 4, 4});
    EXPECT_DOUBLE_EQ(psnr_frame(a, b, roi), 99.0);
    EXPECT_LT(psnr_frame(a, b), 99.0);
    EXPECT_THROW(psnr_frame(a, b, RegionMask::region({12, 12, 8, 8})), GeometryError);
}

TEST(PsnrFrame, ExcludeMarkersIgnoresMarkerDamage) {
    MarkerGeometry g = MarkerGeometry::from_marker_size(30, 2);
    FrameBuffer base(FrameFormat{80, 80, 8, Chroma::C420}, 90, 128);
    FrameBuffer marked_a = embed_markers(base, MarkerPayload::make(1, 1), g);
    FrameBuffer marked_b = embed_markers(base, MarkerPayload::make(1, 2), g);
    // Frames differ only inside marker rectangles.
    EXPECT_LT(psnr_frame(marked_a, marked_b), 99.0);
    EXPECT_DOUBLE_EQ(psnr_frame(marked_a, marked_b, RegionMask::exclude_markers(g)), 99.0);
}

TEST(PsnrSequence, PoolsArithmeticMean) {
    // Construct two pairs with per-frame PSNRs 40 and 50 via exact MSE:
    // 8-bit: psnr = 10 log10(255^2 / mse) -> mse = 255^2 / 10^(psnr/10).
    auto frame_with_mse = [](double target_psnr) {
        FrameFormat fmt{100, 100, 8, Chroma::C420};
        FrameBuffer a(fmt, 100, 0), b = a;
        double mse = 255.0 * 255.0 / std::pow(10.0, target_psnr / 10.0);
        int diff = 5;  // error 25 per damaged pixel
        int n = static_cast<int>(std::lround(mse * 100 * 100 / (diff * diff)));
        for (int i = 0; i < n; ++i) b.y[static_cast<size_t>(i)] = static_cast<uint16_t>(100 + diff);
        return std::pair{a, b};
    };
    auto [a1, b1] = frame_with_mse(40.0);
    auto [a2, b2] = frame_with_mse(50.0);
    QualityRecord rec = psnr_sequence(std::vector<FrameBuffer>{a1, a2},
                                      std::vector<FrameBuffer>{b1, b2});
    ASSERT_EQ(rec.per_frame.size(), 2u);
    EXPECT_NEAR(rec.per_frame[0], 40.0, 0.05);
    EXPECT_NEAR(rec.per_frame[1], 50.0, 0.05);
    EXPECT_NEAR(rec.pooled, 45.0, 0.05);
    EXPECT_EQ(rec.pooling, "arithmetic_mean");
}

TEST(PsnrSequence, MatchesBruteForceOracle) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        FrameFormat fmt{static_cast<int>(8 + 2 * (rng() % 8)), static_cast<int>(8 + 2 * (rng() % 8)),
                        (rng() % 2) ? 8 : 10, Chroma::C420};
        auto ref = oracle::random_clip(fmt, 3, rng());
        auto dist = oracle::random_clip(fmt, 3, rng());
        QualityRecord rec = psnr_sequence(ref, dist);
        for (size_t i = 0; i < 3; ++i)
            ASSERT_NEAR(rec.per_frame[i], oracle::psnr_bruteforce(ref[i], dist[i]), 1e-9);
        ASSERT_NEAR(rec.pooled, oracle::psnr_bruteforce_mean(ref, dist), 1e-9);
    }
}

TEST(PsnrSequence, EmptyInputRejected) {
    EXPECT_THROW(psnr_sequence(std::vector<FrameBuffer>{}, std::vector<FrameBuffer>{}),
                 DimensionError);
}

TEST(PsnrSequence, PooledMeanIsPermutationInvariant) {
    auto ref = oracle::random_clip({16, 16, 8, Chroma::C420}, 4, 5);
    auto dist = oracle::random_clip({16, 16, 8, Chroma::C420}, 4, 6);
    QualityRecord fwd = psnr_sequence(ref, dist);
    std::vector<FrameBuffer> ref_r(ref.rbegin(), ref.rend());
    std::vector<FrameBuffer> dist_r(dist.rbegin(), dist.rend());
    QualityRecord rev = psnr_sequence(ref_r, dist_r);
    EXPECT_NEAR(fwd.pooled, rev.pooled, 1e-12);
}

TEST_F(RunnerTest, StubRunnerScoresPool) {
    oracle::write_text(*dir_ / "ok.sh",
                       "#!/bin/sh\n"
                       "echo '{\"metric\":\"vmaf\",\"frames\":[{\"score\":90},{\"score\":100}]}' > \"$1\"\n");
    MetricRunner r{"vmaf", "sh " + (*dir_ / "ok.sh").string() + " {out} {ref} {dist}", 0, 100};
    QualityRecord rec = run_external_metric(r, "ref.y4m", "dist.y4m", *dir_ / "ok.json");
    EXPECT_DOUBLE_EQ(rec.pooled, 95.0);
    EXPECT_EQ(rec.metric_name, "vmaf");
    ASSERT_EQ(rec.per_frame.size(), 2u);
}

TEST_F(RunnerTest, NonzeroExitCarriesStderr) {
    oracle::write_text(*dir_ / "bad.sh", "#!/bin/sh\necho runner-went-wrong >&2\nexit 1\n");
    MetricRunner r{"vmaf", "sh " + (*dir_ / "bad.sh").string() + " {out} {ref} {dist}", 0, 100};
    try {
        run_external_metric(r, "a", "b", *dir_ / "bad.json");
        FAIL() << "expected ProcessError";
    } catch (const ProcessError& e) {
        EXPECT_NE(std::string(e.what()).find("runner-went-wrong"), std::string::npos);
    }
}

TEST_F(RunnerTest, OutOfRangeScoreRejected) {
    oracle::write_text(*dir_ / "range.sh",
                       "#!/bin/sh\necho '{\"frames\":[{\"score\":101}]}' > \"$1\"\n");
    MetricRunner r{"vmaf", "sh " + (*dir_ / "range.sh").string() + " {out} {ref} {dist}", 0, 100};
    EXPECT_THROW(run_external_metric(r, "a", "b", *dir_ / "range.json"), RangeError);
}

TEST_F(RunnerTest, MalformedJsonRejected) {
    oracle::write_text(*dir_ / "junk.sh", "#!/bin/sh\necho 'not json' > \"$1\"\n");
    MetricRunner r{"vmaf", "sh " + (*dir_ / "junk.sh").string() + " {out} {ref} {dist}", 0, 100};
    EXPECT_THROW(run_external_metric(r, "a", "b", *dir_ / "junk.json"), ParseError);

    oracle::write_text(*dir_ / "noframes.sh", "#!/bin/sh\necho '{\"frames\":[]}' > \"$1\"\n");
    MetricRunner r2{"vmaf", "sh " + (*dir_ / "noframes.sh").string() + " {out} {ref} {dist}", 0, 100};
    EXPECT_THROW(run_external_metric(r2, "a", "b", *dir_ / "noframes.json"), ParseError);
}

TEST_F(RunnerTest, TemplateMustNamePlaceholders) {
    MetricRunner r{"vmaf", "sh tool.sh {ref} {dist}", 0, 100};  // missing {out}
    EXPECT_THROW(run_external_metric(r, "a", "b", *dir_ / "x.json"), ConsistencyError);
}

TEST(NoiseFloorStats, ReportedRangeFixture) {
    // Per-capture floor scores as reported for a genlocked studio chain.
    FloorStats s = summarize_floor({37.01, 37.02, 37.00});
    EXPECT_DOUBLE_EQ(s.max_db, 37.02);
    EXPECT_DOUBLE_EQ(s.min_db, 37.00);
    EXPECT_NEAR(s.range_db, 0.02, 1e-9);
    EXPECT_NEAR(s.mean_db, 37.01, 1e-9);
}

TEST(NoiseFloorStats, IdenticalCapturesSitAtTheCap) {
    auto clip = oracle::random_clip({16, 16, 8, Chroma::C420}, 3, 9);
    FloorStats s = noise_floor({clip, clip}, clip);
    EXPECT_DOUBLE_EQ(s.max_db, 99.0);
    EXPECT_DOUBLE_EQ(s.min_db, 99.0);
    EXPECT_DOUBLE_EQ(s.range_db, 0.0);
}

TEST(NoiseFloorStats, RequiresTwoAlignedCaptures) {
    auto clip = oracle::random_clip({16, 16, 8, Chroma::C420}, 3, 9);
    EXPECT_THROW(noise_floor({clip}, clip), DimensionError);
    auto shorter = std::vector<FrameBuffer>(clip.begin(), clip.begin() + 2);
    EXPECT_THROW(noise_floor({clip, shorter}, clip), DimensionError);
}

}  // namespace

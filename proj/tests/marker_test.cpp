#include <gtest/gtest.h>

#include "oracle.hpp"
#include "vpcb/channel.hpp"
#include "vpcb/marker.hpp"

using namespace vpcb;

namespace {

TEST(Crc8, ZeroPayloadHasZeroCrc) {
    MarkerPayload p = MarkerPayload::make(0, 0);
    EXPECT_EQ(p.crc, 0x00);
}

TEST(Crc8, MatchesBitSerialOracle) {
    std::mt19937 rng(21);
    for (int i = 0; i < 500; ++i) {
        uint16_t clip = static_cast<uint16_t>(rng());
        uint32_t frame = rng() % (1u << 24);
        MarkerPayload p = MarkerPayload::make(clip, frame);
        auto bytes = p.payload_bytes();
        EXPECT_EQ(p.crc, oracle::crc8_bitserial({bytes.begin(), bytes.end()}));
    }
}

TEST(Payload, FrameIndexLimitedTo24Bits) {
    EXPECT_NO_THROW(MarkerPayload::make(1, (1u << 24) - 1));
    EXPECT_THROW(MarkerPayload::make(1, 1u << 24), RangeError);
}

TEST(Geometry, DefaultsTo90PxWithTwoPxInset) {
    MarkerGeometry g;
    EXPECT_EQ(g.size_px(), 90);
    EXPECT_EQ(g.inset, 2);
    EXPECT_THROW(MarkerGeometry::from_marker_size(85, 2), GeometryError);
    EXPECT_THROW(MarkerGeometry::from_marker_size(20, 2), GeometryError);  // 2 px modules
    EXPECT_EQ(MarkerGeometry::from_marker_size(30, 1).module_size, 3);
}

TEST(Geometry, UhdFootprintBelowOnePercent) {
    MarkerGeometry g;
    double fraction = 4.0 * g.size_px() * g.size_px() / (3840.0 * 2160.0);
    EXPECT_NEAR(fraction, 0.0039, 0.0002);
    EXPECT_LT(fraction, 0.01);
}

TEST(RenderMarker, DeterministicAndDecodable) {
    MarkerPayload p = MarkerPayload::make(1, 1);
    // CRC for clip 1 / frame 1 comes from the independent bit-serial oracle.
    auto bytes = p.payload_bytes();
    ASSERT_EQ(p.crc, oracle::crc8_bitserial({bytes.begin(), bytes.end()}));

    LumaPatch a = render_marker(p, {}, 8);
    LumaPatch b = render_marker(p, {}, 8);
    EXPECT_EQ(a.px, b.px);
    for (uint16_t s : a.px) EXPECT_TRUE(s == 0 || s == 255);

    auto decoded = decode_marker(a, {});
    ASSERT_TRUE(decoded.has_value());
    EXPECT_EQ(*decoded, p);
}

TEST(RenderMarker, TenBitUsesFullScaleWhite) {
    LumaPatch a = render_marker(MarkerPayload::make(3, 9), {}, 10);
    uint16_t maxv = 0;
    for (uint16_t s : a.px) maxv = std::max(maxv, s);
    EXPECT_EQ(maxv, 1023);
}

TEST(DecodeMarker, RoundtripOverRandomPayloads) {
    std::mt19937 rng(5);
    for (int i = 0; i < 10000; ++i) {
        MarkerPayload p =
            MarkerPayload::make(static_cast<uint16_t>(rng()), rng() % (1u << 24));
        auto decoded = decode_marker(render_marker(p, {}, 8), {});
        ASSERT_TRUE(decoded.has_value()) << "payload " << i;
        ASSERT_EQ(*decoded, p);
    }
}

TEST(DecodeMarker, SurvivesCalibratedChannelNoise) {
    // sigma = 3.602 is the 37 dB noise-floor calibration at 8 bit: the
    // black/white gap of 255 dwarfs it.
    MarkerGeometry g;
    MarkerPayload p = MarkerPayload::make(7, 1234);
    LumaPatch clean = render_marker(p, g, 8);
    double sigma = calibrate_noise_for_floor(37.0, 8);
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        LumaPatch noisy = clean;
        RandomStream rng(mix_seed(424242, static_cast<uint64_t>(trial)));
        for (auto& s : noisy.px) {
            long v = std::lround(s + sigma * rng.next_gaussian());
            s = static_cast<uint16_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
        }
        auto decoded = decode_marker(noisy, g);
        if (!decoded || !(*decoded == p)) ++failures;
    }
    EXPECT_EQ(failures, 0);
}

TEST(DecodeMarker, NoiseSigma8SuccessRate) {
    // Module invariant: >= 99.9% decode success at sigma 8 over 10k trials.
    MarkerGeometry g;
    int ok = 0;
    const int kTrials = 10000;
    for (int trial = 0; trial < kTrials; ++trial) {
        MarkerPayload p = MarkerPayload::make(static_cast<uint16_t>(trial),
                                              static_cast<uint32_t>(trial * 31 % (1 << 24)));
        LumaPatch patch = render_marker(p, g, 8);
        RandomStream rng(mix_seed(777, static_cast<uint64_t>(trial)));
        for (auto& s : patch.px) {
            long v = std::lround(s + 8.0 * rng.next_gaussian());
            s = static_cast<uint16_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
        }
        auto decoded = decode_marker(patch, g);
        if (decoded && *decoded == p) ++ok;
    }
    EXPECT_GE(ok, kTrials * 999 / 1000);
}

TEST(DecodeMarker, SingleInvertedModuleFails) {
    MarkerGeometry g;
    MarkerPayload p = MarkerPayload::make(2, 42);
    LumaPatch patch = render_marker(p, g, 8);
    // Invert interior module (r=1, c=1): top-left data module.
    int m = g.module_size;
    for (int y = m; y < 2 * m; ++y)
        for (int x = m; x < 2 * m; ++x) {
            auto& s = patch.px[static_cast<size_t>(y) * patch.size + x];
            s = static_cast<uint16_t>(255 - s);
        }
    EXPECT_FALSE(decode_marker(patch, g).has_value());
}

TEST(DecodeMarker, WrongPatchSizeThrows) {
    LumaPatch p{30, std::vector<uint16_t>(900, 0)};
    EXPECT_THROW(decode_marker(p, {}), DimensionError);
}

FrameBuffer marked_frame(uint16_t clip_id, uint32_t frame_index, const MarkerGeometry& g,
                         int w = 200, int h = 200) {
    FrameBuffer f(FrameFormat{w, h, 8, Chroma::C420}, 128, 128);
    return embed_markers(f, MarkerPayload::make(clip_id, frame_index), g);
}

TEST(EmbedMarkers, DifferencesConfinedToCorners) {
    MarkerGeometry g;
    FrameBuffer base(FrameFormat{200, 200, 8, Chroma::C420}, 128, 128);
    FrameBuffer marked = embed_markers(base, MarkerPayload::make(5, 6), g);
    auto corners = marker_corners(base.fmt, g);
    int s = g.size_px();
    for (int y = 0; y < 200; ++y)
        for (int x = 0; x < 200; ++x) {
            bool inside = false;
            for (auto [cx, cy] : corners)
                if (x >= cx && x < cx + s && y >= cy && y < cy + s) inside = true;
            if (!inside) {
                ASSERT_EQ(marked.luma(x, y), base.luma(x, y)) << x << "," << y;
            }
        }
}

TEST(EmbedMarkers, ChromaNeutralUnderFootprint) {
    MarkerGeometry g;  // marker luma range [2, 92): chroma range [1, 46)
    FrameBuffer base(FrameFormat{200, 200, 8, Chroma::C420}, 128, 200);
    FrameBuffer marked = embed_markers(base, MarkerPayload::make(5, 6), g);
    int cw = base.fmt.chroma_width();
    EXPECT_EQ(marked.cb[static_cast<size_t>(1) * cw + 1], 128);
    EXPECT_EQ(marked.cr[static_cast<size_t>(45) * cw + 45], 128);
    EXPECT_EQ(marked.cb[0], 200);  // outside the inset footprint
    EXPECT_EQ(marked.cb[static_cast<size_t>(50) * cw + 50], 200);  // frame center
}

TEST(EmbedMarkers, FrameTooSmallThrows) {
    FrameBuffer tiny(FrameFormat{100, 100, 8, Chroma::C420});
    EXPECT_THROW(embed_markers(tiny, MarkerPayload::make(1, 1), {}), GeometryError);
}

TEST(DecodeFrameId, CleanFrameAllCornersAgree) {
    MarkerGeometry g;
    FrameBuffer f = marked_frame(9, 7, g);
    FrameIdResult r = decode_frame_id(f, g);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.payload->frame_index, 7u);
    EXPECT_EQ(r.payload->clip_id, 9);
    EXPECT_EQ(r.agreement, 4);
}

void occlude_corner(FrameBuffer& f, int corner, const MarkerGeometry& g) {
    auto corners = marker_corners(f.fmt, g);
    auto [x0, y0] = corners[static_cast<size_t>(corner)];
    for (int y = 0; y < g.size_px(); ++y)
        for (int x = 0; x < g.size_px(); ++x)
            f.y[static_cast<size_t>(y0 + y) * f.fmt.width + (x0 + x)] = 0;
}

TEST(DecodeFrameId, MajorityUnaffectedByOneOcclusion) {
    MarkerGeometry g;
    FrameBuffer f = marked_frame(9, 7, g);
    occlude_corner(f, 2, g);
    FrameIdResult r = decode_frame_id(f, g);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.agreement, 3);
    EXPECT_EQ(r.payload->frame_index, 7u);
}

TEST(DecodeFrameId, TwoAgreeingCornersSuffice) {
    MarkerGeometry g;
    FrameBuffer f = marked_frame(9, 7, g);
    occlude_corner(f, 0, g);
    occlude_corner(f, 3, g);
    FrameIdResult r = decode_frame_id(f, g);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.agreement, 2);
    EXPECT_EQ(r.payload->frame_index, 7u);
}

TEST(DecodeFrameId, FailsBelowTwoCorners) {
    MarkerGeometry g;
    FrameBuffer f = marked_frame(9, 7, g);
    occlude_corner(f, 0, g);
    occlude_corner(f, 1, g);
    occlude_corner(f, 2, g);
    FrameIdResult r = decode_frame_id(f, g);
    EXPECT_FALSE(r.ok());
    ASSERT_TRUE(r.corners[3].has_value());  // diagnostics keep the readable corner
    EXPECT_EQ(r.corners[3]->frame_index, 7u);
}

TEST(DecodeFrameId, EmbedThenDecodeRoundtrip) {
    MarkerGeometry g = MarkerGeometry::from_marker_size(30, 2);
    FrameBuffer f(FrameFormat{64, 64, 8, Chroma::C420}, 90, 140);
    FrameBuffer marked = embed_markers(f, MarkerPayload::make(3, 7), g);
    FrameIdResult r = decode_frame_id(marked, g);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.payload->frame_index, 7u);
}

}  // namespace

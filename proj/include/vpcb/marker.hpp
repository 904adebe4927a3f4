#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vpcb/frame.hpp"

namespace vpcb {

// Corner frame-sync markers.
//
// Each marker is a 10x10 module grid. The outer ring (36 modules) is a fixed
// alternating localization pattern; the 8x8 interior carries 64 bits row-major
// MSB-first: a 48-bit codeword (16-bit clip id, 24-bit frame index, 8-bit CRC,
// all big-endian) followed by the CRC byte repeated twice. Black modules are
// sample value 0, white modules 2^bit_depth - 1. Decoding is luma-only with a
// threshold taken from the known ring pattern, so it survives the additive
// noise of the capture chain without any geometric search.

// CRC-8, polynomial 0x07, init 0x00, xorout 0x00, MSB first.
inline uint8_t crc8(const uint8_t* data, size_t len) {
    uint8_t crc = 0x00;
    for (size_t i = 0; i < len; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b)
            crc = static_cast<uint8_t>((crc & 0x80) ? (crc << 1) ^ 0x07 : crc << 1);
    }
    return crc;
}

struct MarkerPayload {
    uint16_t clip_id = 0;
    uint32_t frame_index = 0;  // 24-bit
    uint8_t crc = 0;

    bool operator==(const MarkerPayload&) const = default;

    std::array<uint8_t, 5> payload_bytes() const {
        return {static_cast<uint8_t>(clip_id >> 8), static_cast<uint8_t>(clip_id & 0xff),
                static_cast<uint8_t>((frame_index >> 16) & 0xff),
                static_cast<uint8_t>((frame_index >> 8) & 0xff),
                static_cast<uint8_t>(frame_index & 0xff)};
    }

    static MarkerPayload make(uint16_t clip_id, uint32_t frame_index) {
        if (frame_index >= (1u << 24))
            throw RangeError("frame index " + std::to_string(frame_index) + " exceeds 24 bits");
        MarkerPayload p{clip_id, frame_index, 0};
        auto bytes = p.payload_bytes();
        p.crc = crc8(bytes.data(), bytes.size());
        return p;
    }

    bool crc_consistent() const {
        auto bytes = payload_bytes();
        return crc == crc8(bytes.data(), bytes.size());
    }
};

struct MarkerGeometry {
    static constexpr int kGrid = 10;          // modules per side
    static constexpr int kInteriorBits = 64;  // 8x8 interior

    int module_size = 9;  // pixels per module; 9 -> 90x90 px marker
    int inset = 2;        // pixels from the frame corner

    int size_px() const { return kGrid * module_size; }

    void validate() const {
        if (module_size < 3) throw GeometryError("marker module size must be >= 3 px");
        if (inset < 0) throw GeometryError("marker inset must be >= 0");
    }

    static MarkerGeometry from_marker_size(int size_px, int inset) {
        if (size_px % kGrid != 0)
            throw GeometryError("marker size " + std::to_string(size_px) +
                                " is not a multiple of the 10-module grid");
        MarkerGeometry g{size_px / kGrid, inset};
        g.validate();
        return g;
    }
};

// Luma-only square patch, row-major.
struct LumaPatch {
    int size = 0;
    std::vector<uint16_t> px;

    uint16_t at(int x, int y) const { return px[static_cast<size_t>(y) * size + x]; }
};

namespace detail {

// Ring module (r,c) is white when r+c is even.
inline bool ring_module_white(int r, int c) { return ((r + c) & 1) == 0; }

inline bool is_ring(int r, int c) {
    return r == 0 || c == 0 || r == MarkerGeometry::kGrid - 1 || c == MarkerGeometry::kGrid - 1;
}

// Interior bits: codeword then two CRC repetitions, row-major MSB-first.
inline std::array<bool, 64> interior_bits(const MarkerPayload& payload) {
    std::array<uint8_t, 8> bytes{};
    auto pb = payload.payload_bytes();
    for (int i = 0; i < 5; ++i) bytes[static_cast<size_t>(i)] = pb[static_cast<size_t>(i)];
    bytes[5] = payload.crc;
    bytes[6] = payload.crc;
    bytes[7] = payload.crc;
    std::array<bool, 64> bits{};
    for (int i = 0; i < 64; ++i)
        bits[static_cast<size_t>(i)] = (bytes[static_cast<size_t>(i / 8)] >> (7 - i % 8)) & 1;
    return bits;
}

}  // namespace detail

inline LumaPatch render_marker(const MarkerPayload& payload, const MarkerGeometry& geometry,
                               int bit_depth) {
    geometry.validate();
    if (!payload.crc_consistent()) throw ConsistencyError("marker payload CRC inconsistent");
    const int m = geometry.module_size;
    const int size = geometry.size_px();
    const uint16_t white = static_cast<uint16_t>((1u << bit_depth) - 1);
    auto bits = detail::interior_bits(payload);

    LumaPatch patch{size, std::vector<uint16_t>(static_cast<size_t>(size) * size, 0)};
    for (int r = 0; r < MarkerGeometry::kGrid; ++r) {
        for (int c = 0; c < MarkerGeometry::kGrid; ++c) {
            bool on;
            if (detail::is_ring(r, c)) {
                on = detail::ring_module_white(r, c);
            } else {
                on = bits[static_cast<size_t>((r - 1) * 8 + (c - 1))];
            }
            if (!on) continue;
            for (int y = r * m; y < (r + 1) * m; ++y)
                for (int x = c * m; x < (c + 1) * m; ++x)
                    patch.px[static_cast<size_t>(y) * size + x] = white;
        }
    }
    return patch;
}

// The four marker origins: TL, TR, BL, BR. Throws if markers would overlap.
inline std::array<std::pair<int, int>, 4> marker_corners(const FrameFormat& fmt,
                                                         const MarkerGeometry& geometry) {
    geometry.validate();
    const int s = geometry.size_px();
    const int need = 2 * (geometry.inset + s);
    if (fmt.width < need || fmt.height < need)
        throw GeometryError("frame " + std::to_string(fmt.width) + "x" + std::to_string(fmt.height) +
                            " too small for four " + std::to_string(s) + "px markers with inset " +
                            std::to_string(geometry.inset));
    const int i = geometry.inset;
    return {{{i, i},
             {fmt.width - i - s, i},
             {i, fmt.height - i - s},
             {fmt.width - i - s, fmt.height - i - s}}};
}

inline FrameBuffer embed_markers(const FrameBuffer& frame, const MarkerPayload& payload,
                                 const MarkerGeometry& geometry = {}) {
    auto corners = marker_corners(frame.fmt, geometry);
    LumaPatch patch = render_marker(payload, geometry, frame.fmt.bit_depth);
    FrameBuffer out = frame;
    const int s = geometry.size_px();
    const uint16_t neutral = frame.fmt.mid_value();
    const int sub = frame.fmt.chroma == Chroma::C420 ? 2 : 1;
    const int cw = frame.fmt.chroma_width();

    for (auto [x0, y0] : corners) {
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x)
                out.y[static_cast<size_t>(y0 + y) * frame.fmt.width + (x0 + x)] = patch.at(x, y);
        int cx0 = x0 / sub, cy0 = y0 / sub;
        int cx1 = (x0 + s + sub - 1) / sub, cy1 = (y0 + s + sub - 1) / sub;
        for (int cy = cy0; cy < cy1; ++cy)
            for (int cx = cx0; cx < cx1; ++cx) {
                out.cb[static_cast<size_t>(cy) * cw + cx] = neutral;
                out.cr[static_cast<size_t>(cy) * cw + cx] = neutral;
            }
    }
    return out;
}

inline LumaPatch extract_luma_patch(const FrameBuffer& frame, int x0, int y0, int size) {
    LumaPatch p{size, std::vector<uint16_t>(static_cast<size_t>(size) * size)};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            p.px[static_cast<size_t>(y) * size + x] =
                frame.y[static_cast<size_t>(y0 + y) * frame.fmt.width + (x0 + x)];
    return p;
}

inline std::optional<MarkerPayload> decode_marker(const LumaPatch& patch,
                                                  const MarkerGeometry& geometry = {}) {
    geometry.validate();
    const int m = geometry.module_size;
    if (patch.size != geometry.size_px())
        throw DimensionError("patch size " + std::to_string(patch.size) +
                             " does not match marker geometry " + std::to_string(geometry.size_px()));

    // Threshold: midpoint of the ring's known white and black module means.
    double white_sum = 0, black_sum = 0;
    int64_t white_n = 0, black_n = 0;
    for (int r = 0; r < MarkerGeometry::kGrid; ++r)
        for (int c = 0; c < MarkerGeometry::kGrid; ++c) {
            if (!detail::is_ring(r, c)) continue;
            double sum = 0;
            for (int y = r * m; y < (r + 1) * m; ++y)
                for (int x = c * m; x < (c + 1) * m; ++x) sum += patch.at(x, y);
            if (detail::ring_module_white(r, c)) {
                white_sum += sum;
                white_n += m * m;
            } else {
                black_sum += sum;
                black_n += m * m;
            }
        }
    double mean_white = white_sum / static_cast<double>(white_n);
    double mean_black = black_sum / static_cast<double>(black_n);
    if (mean_white - mean_black < 1.0) return std::nullopt;  // flat or occluded region
    double threshold = (mean_white + mean_black) / 2.0;

    // Each interior module decided by its center 3x3 mean.
    std::array<bool, 64> bits{};
    for (int r = 1; r < MarkerGeometry::kGrid - 1; ++r)
        for (int c = 1; c < MarkerGeometry::kGrid - 1; ++c) {
            int cx = c * m + m / 2, cy = r * m + m / 2;
            double sum = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) sum += patch.at(cx + dx, cy + dy);
            bits[static_cast<size_t>((r - 1) * 8 + (c - 1))] = sum / 9.0 > threshold;
        }

    std::array<uint8_t, 8> bytes{};
    for (int i = 0; i < 64; ++i)
        if (bits[static_cast<size_t>(i)])
            bytes[static_cast<size_t>(i / 8)] |= static_cast<uint8_t>(1u << (7 - i % 8));

    MarkerPayload p;
    p.clip_id = static_cast<uint16_t>((bytes[0] << 8) | bytes[1]);
    p.frame_index = (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 8) |
                    bytes[4];
    p.crc = bytes[5];
    if (!p.crc_consistent()) return std::nullopt;

    int agree = 0;
    for (int i = 0; i < 8; ++i) {
        uint8_t bit = static_cast<uint8_t>((p.crc >> (7 - i)) & 1);
        if (((bytes[6] >> (7 - i)) & 1) == bit) ++agree;
        if (((bytes[7] >> (7 - i)) & 1) == bit) ++agree;
    }
    if (agree < 12) return std::nullopt;
    return p;
}

struct FrameIdResult {
    std::optional<MarkerPayload> payload;  // unset: frame unreadable (<2 agreeing corners)
    int agreement = 0;
    std::array<std::optional<MarkerPayload>, 4> corners{};  // TL, TR, BL, BR diagnostics

    bool ok() const { return payload.has_value(); }
};

inline FrameIdResult decode_frame_id(const FrameBuffer& frame,
                                     const MarkerGeometry& geometry = {}) {
    auto corners = marker_corners(frame.fmt, geometry);
    FrameIdResult result;
    for (size_t i = 0; i < corners.size(); ++i) {
        auto [x0, y0] = corners[i];
        result.corners[i] =
            decode_marker(extract_luma_patch(frame, x0, y0, geometry.size_px()), geometry);
    }
    // Majority vote across corners; ties resolved by corner order.
    for (size_t i = 0; i < 4; ++i) {
        if (!result.corners[i]) continue;
        int count = 0;
        for (size_t j = 0; j < 4; ++j)
            if (result.corners[j] && *result.corners[j] == *result.corners[i]) ++count;
        if (count > result.agreement) {
            result.agreement = count;
            result.payload = result.corners[i];
        }
    }
    if (result.agreement < 2) {
        result.payload.reset();
        result.agreement = 0;
    }
    return result;
}

}  // namespace vpcb

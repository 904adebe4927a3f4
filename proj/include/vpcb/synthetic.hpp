#pragma once

#include <algorithm>
#include <vector>

#include "vpcb/frame.hpp"

namespace vpcb {

// Synthetic test clips: desk-scale stand-ins with controlled temporal
// behaviour. Deterministic for a fixed seed.
enum class SyntheticKind { Gradient, MovingBar, Noise, TextLike };

inline const char* to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::Gradient: return "gradient";
        case SyntheticKind::MovingBar: return "moving_bar";
        case SyntheticKind::Noise: return "noise";
        case SyntheticKind::TextLike: return "text_like";
    }
    return "?";
}

namespace detail {

inline FrameBuffer gradient_frame(const FrameFormat& fmt) {
    FrameBuffer f(fmt);
    uint32_t maxv = fmt.max_value();
    for (int y = 0; y < fmt.height; ++y)
        for (int x = 0; x < fmt.width; ++x)
            f.y[static_cast<size_t>(y) * fmt.width + x] =
                static_cast<uint16_t>(static_cast<uint64_t>(x) * maxv / std::max(1, fmt.width - 1));
    int cw = fmt.chroma_width(), ch = fmt.chroma_height();
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            f.cb[static_cast<size_t>(y) * cw + x] =
                static_cast<uint16_t>(static_cast<uint64_t>(y) * maxv / std::max(1, ch - 1));
            f.cr[static_cast<size_t>(y) * cw + x] = fmt.mid_value();
        }
    return f;
}

// Vertical bright bar, 1/8 frame wide, translating 2 px/frame with
// wraparound; each frame is the previous one cyclically shifted. The bar
// carries internal texture so its blocks do not collapse to a couple of
// repeated patterns.
inline FrameBuffer moving_bar_frame(const FrameFormat& fmt, int64_t index) {
    uint16_t bg = static_cast<uint16_t>(fmt.max_value() / 5);
    FrameBuffer f(fmt, bg, fmt.mid_value());
    int w = fmt.width;
    int bar_w = std::max(2, w / 8);
    int x0 = static_cast<int>((index * 2) % w);
    uint32_t half = fmt.max_value() / 2u;
    for (int y = 0; y < fmt.height; ++y)
        for (int x = 0; x < w; ++x) {
            int local = (x - x0 + w) % w;
            if (local >= bar_w) continue;
            uint32_t ripple = (static_cast<uint32_t>(local) * 13 + static_cast<uint32_t>(y) * 7) %
                              (half + 1);
            f.y[static_cast<size_t>(y) * w + x] = static_cast<uint16_t>(fmt.max_value() - ripple);
        }
    int cw = fmt.chroma_width(), ch = fmt.chroma_height();
    int sub = fmt.chroma == Chroma::C420 ? 2 : 1;
    for (int y = 0; y < ch; ++y)
        for (int cx = 0; cx < cw; ++cx) {
            int local = (cx * sub - x0 + w) % w;
            if (local >= bar_w) continue;
            f.cb[static_cast<size_t>(y) * cw + cx] = static_cast<uint16_t>(fmt.max_value() / 4 * 3);
        }
    return f;
}

inline void fill_noise(std::vector<uint16_t>& plane, RandomStream& rng, uint16_t maxv) {
    for (auto& s : plane) s = static_cast<uint16_t>(rng.next_below(static_cast<uint32_t>(maxv) + 1));
}

// Hard-edged glyph-like rectangles with saturated chroma; static content.
inline FrameBuffer text_like_frame(const FrameFormat& fmt, uint64_t seed) {
    FrameBuffer f(fmt, fmt.max_value(), fmt.mid_value());
    RandomStream rng(mix_seed(seed, 0x7e817));
    int cells_x = std::max(2, fmt.width / 16);
    int cells_y = std::max(2, fmt.height / 16);
    int cell_w = fmt.width / cells_x;
    int cell_h = fmt.height / cells_y;
    for (int cy = 0; cy < cells_y; ++cy)
        for (int cx = 0; cx < cells_x; ++cx) {
            if (rng.next_below(3) == 0) continue;  // blank cell
            int gw = 1 + static_cast<int>(rng.next_below(static_cast<uint32_t>(std::max(1, cell_w - 2))));
            int gh = 1 + static_cast<int>(rng.next_below(static_cast<uint32_t>(std::max(1, cell_h - 2))));
            uint16_t ink = rng.next_below(4) == 0 ? fmt.max_value() / 2 : 0;
            for (int y = cy * cell_h; y < cy * cell_h + gh; ++y)
                for (int x = cx * cell_w; x < cx * cell_w + gw; ++x)
                    f.y[static_cast<size_t>(y) * fmt.width + x] = ink;
        }
    int cw = fmt.chroma_width(), ch = fmt.chroma_height();
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            bool hot = ((x / 8) + (y / 8)) % 2 == 0;
            f.cb[static_cast<size_t>(y) * cw + x] = hot ? fmt.max_value() : 0;
            f.cr[static_cast<size_t>(y) * cw + x] = hot ? 0 : fmt.max_value();
        }
    return f;
}

}  // namespace detail

inline std::vector<FrameBuffer> generate_synthetic_clip(SyntheticKind kind, const VideoSpec& spec,
                                                        uint64_t seed) {
    spec.validate();
    FrameFormat fmt = spec.format();
    std::vector<FrameBuffer> frames;
    frames.reserve(static_cast<size_t>(spec.frame_count));
    for (int64_t i = 0; i < spec.frame_count; ++i) {
        switch (kind) {
            case SyntheticKind::Gradient:
                frames.push_back(i == 0 ? detail::gradient_frame(fmt) : frames[0]);
                break;
            case SyntheticKind::MovingBar:
                frames.push_back(detail::moving_bar_frame(fmt, i));
                break;
            case SyntheticKind::Noise: {
                FrameBuffer f(fmt);
                RandomStream rng(mix_seed(seed, 0x401e, static_cast<uint64_t>(i)));
                detail::fill_noise(f.y, rng, fmt.max_value());
                detail::fill_noise(f.cb, rng, fmt.max_value());
                detail::fill_noise(f.cr, rng, fmt.max_value());
                frames.push_back(std::move(f));
                break;
            }
            case SyntheticKind::TextLike:
                frames.push_back(i == 0 ? detail::text_like_frame(fmt, seed) : frames[0]);
                break;
        }
    }
    return frames;
}

}  // namespace vpcb

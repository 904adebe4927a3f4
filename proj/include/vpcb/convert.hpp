#pragma once

#include "vpcb/frame.hpp"

namespace vpcb {

// Pixel-format conversion.
//   4:4:4 -> 4:2:0  chroma by 2x2 box average (rounded)
//   4:2:0 -> 4:4:4  chroma by nearest-neighbor replication
//   depth up        left shift
//   depth down      rounding right shift
// Luma is never touched by chroma-only conversion.

namespace detail {

inline std::vector<uint16_t> shift_plane(const std::vector<uint16_t>& in, int from_depth,
                                         int to_depth) {
    std::vector<uint16_t> out(in.size());
    if (to_depth >= from_depth) {
        int s = to_depth - from_depth;
        for (size_t i = 0; i < in.size(); ++i) out[i] = static_cast<uint16_t>(in[i] << s);
    } else {
        int s = from_depth - to_depth;
        uint16_t half = static_cast<uint16_t>(1u << (s - 1));
        uint16_t maxv = static_cast<uint16_t>((1u << to_depth) - 1);
        for (size_t i = 0; i < in.size(); ++i) {
            uint32_t v = (static_cast<uint32_t>(in[i]) + half) >> s;
            out[i] = static_cast<uint16_t>(v > maxv ? maxv : v);
        }
    }
    return out;
}

inline std::vector<uint16_t> box_down_2x2(const std::vector<uint16_t>& in, int w, int h) {
    int cw = w / 2, ch = h / 2;
    std::vector<uint16_t> out(static_cast<size_t>(cw) * ch);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            uint32_t sum = in[static_cast<size_t>(2 * y) * w + 2 * x] +
                           in[static_cast<size_t>(2 * y) * w + 2 * x + 1] +
                           in[static_cast<size_t>(2 * y + 1) * w + 2 * x] +
                           in[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1];
            out[static_cast<size_t>(y) * cw + x] = static_cast<uint16_t>((sum + 2) / 4);
        }
    }
    return out;
}

inline std::vector<uint16_t> replicate_up_2x2(const std::vector<uint16_t>& in, int cw, int ch) {
    int w = cw * 2, h = ch * 2;
    std::vector<uint16_t> out(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] = in[static_cast<size_t>(y / 2) * cw + x / 2];
    return out;
}

}  // namespace detail

inline FrameBuffer convert_format(const FrameBuffer& frame, Chroma target_chroma,
                                  int target_depth) {
    frame.fmt.validate();
    FrameFormat target{frame.fmt.width, frame.fmt.height, target_depth, target_chroma};
    target.validate();  // throws FormatError for unsupported targets

    if (target == frame.fmt) return frame;

    FrameBuffer out;
    out.fmt = target;

    // Chroma layout first, at source depth.
    std::vector<uint16_t> cb = frame.cb;
    std::vector<uint16_t> cr = frame.cr;
    if (frame.fmt.chroma == Chroma::C444 && target_chroma == Chroma::C420) {
        cb = detail::box_down_2x2(cb, frame.fmt.width, frame.fmt.height);
        cr = detail::box_down_2x2(cr, frame.fmt.width, frame.fmt.height);
    } else if (frame.fmt.chroma == Chroma::C420 && target_chroma == Chroma::C444) {
        cb = detail::replicate_up_2x2(cb, frame.fmt.chroma_width(), frame.fmt.chroma_height());
        cr = detail::replicate_up_2x2(cr, frame.fmt.chroma_width(), frame.fmt.chroma_height());
    }

    if (target_depth != frame.fmt.bit_depth) {
        out.y = detail::shift_plane(frame.y, frame.fmt.bit_depth, target_depth);
        out.cb = detail::shift_plane(cb, frame.fmt.bit_depth, target_depth);
        out.cr = detail::shift_plane(cr, frame.fmt.bit_depth, target_depth);
    } else {
        out.y = frame.y;
        out.cb = std::move(cb);
        out.cr = std::move(cr);
    }
    return out;
}

inline std::vector<FrameBuffer> convert_clip(const std::vector<FrameBuffer>& frames,
                                             Chroma target_chroma, int target_depth) {
    std::vector<FrameBuffer> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(convert_format(f, target_chroma, target_depth));
    return out;
}

}  // namespace vpcb

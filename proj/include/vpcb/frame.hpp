#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vpcb/core.hpp"

namespace vpcb {

enum class Chroma { C420, C444 };

inline const char* to_string(Chroma c) {
    return c == Chroma::C420 ? "420" : "444";
}

// Per-frame pixel layout. Samples are stored one per uint16_t regardless of
// bit depth; every sample must stay below 2^bit_depth.
struct FrameFormat {
    int width = 0;
    int height = 0;
    int bit_depth = 8;  // 8, 10 or 12
    Chroma chroma = Chroma::C420;

    bool operator==(const FrameFormat&) const = default;

    int chroma_width() const { return chroma == Chroma::C420 ? width / 2 : width; }
    int chroma_height() const { return chroma == Chroma::C420 ? height / 2 : height; }
    uint16_t max_value() const { return static_cast<uint16_t>((1u << bit_depth) - 1); }
    uint16_t mid_value() const { return static_cast<uint16_t>(1u << (bit_depth - 1)); }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw FormatError("frame dimensions must be positive, got " + std::to_string(width) +
                              "x" + std::to_string(height));
        if (chroma == Chroma::C420 && (width % 2 != 0 || height % 2 != 0))
            throw FormatError("4:2:0 requires even dimensions, got " + std::to_string(width) +
                              "x" + std::to_string(height));
        if (bit_depth != 8 && bit_depth != 10 && bit_depth != 12)
            throw FormatError("unsupported bit depth " + std::to_string(bit_depth));
    }
};

// Clip-level description: frame layout plus timing.
struct VideoSpec {
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    Chroma chroma = Chroma::C420;
    Rational frame_rate{30, 1};
    int64_t frame_count = 0;

    bool operator==(const VideoSpec&) const = default;

    FrameFormat format() const { return FrameFormat{width, height, bit_depth, chroma}; }

    double duration_seconds() const {
        return static_cast<double>(frame_count) * frame_rate.den / frame_rate.num;
    }

    void validate() const {
        format().validate();
        if (frame_rate.num <= 0 || frame_rate.den <= 0)
            throw FormatError("frame rate must be positive, got " + to_string(frame_rate));
        if (frame_count < 0)
            throw FormatError("negative frame count");
    }

    static VideoSpec for_frames(const FrameFormat& fmt, Rational rate, int64_t count) {
        return VideoSpec{fmt.width, fmt.height, fmt.bit_depth, fmt.chroma, rate, count};
    }
};

// Planar Y/Cb/Cr frame. Immutable by convention once handed to a pipeline
// stage; stages return new frames.
struct FrameBuffer {
    FrameFormat fmt;
    std::vector<uint16_t> y;
    std::vector<uint16_t> cb;
    std::vector<uint16_t> cr;

    FrameBuffer() = default;

    explicit FrameBuffer(const FrameFormat& f, uint16_t luma_fill = 0, uint16_t chroma_fill = 0)
        : fmt(f),
          y(static_cast<size_t>(f.width) * f.height, luma_fill),
          cb(static_cast<size_t>(f.chroma_width()) * f.chroma_height(), chroma_fill),
          cr(static_cast<size_t>(f.chroma_width()) * f.chroma_height(), chroma_fill) {}

    bool operator==(const FrameBuffer&) const = default;

    uint16_t& luma(int x, int yy) { return y[static_cast<size_t>(yy) * fmt.width + x]; }
    uint16_t luma(int x, int yy) const { return y[static_cast<size_t>(yy) * fmt.width + x]; }

    size_t luma_size() const { return y.size(); }
    size_t chroma_size() const { return cb.size(); }

    void validate() const {
        fmt.validate();
        auto check_plane = [&](const std::vector<uint16_t>& p, size_t expected, const char* name) {
            if (p.size() != expected)
                throw DimensionError(std::string(name) + " plane size " + std::to_string(p.size()) +
                                     " does not match format (expected " + std::to_string(expected) + ")");
            uint16_t maxv = fmt.max_value();
            for (uint16_t s : p)
                if (s > maxv)
                    throw RangeError(std::string(name) + " sample " + std::to_string(s) +
                                     " exceeds bit depth " + std::to_string(fmt.bit_depth));
        };
        check_plane(y, static_cast<size_t>(fmt.width) * fmt.height, "Y");
        size_t cs = static_cast<size_t>(fmt.chroma_width()) * fmt.chroma_height();
        check_plane(cb, cs, "Cb");
        check_plane(cr, cs, "Cr");
    }
};

// Where a clip sits in the reference -> degraded -> captured chain.
enum class ClipRole { Ref, Deg, DegDec, RefCam, DegDecCam };

inline const char* to_string(ClipRole r) {
    switch (r) {
        case ClipRole::Ref: return "ref";
        case ClipRole::Deg: return "deg";
        case ClipRole::DegDec: return "degdec";
        case ClipRole::RefCam: return "refcam";
        case ClipRole::DegDecCam: return "degdeccam";
    }
    return "?";
}

// Legal role transitions: Ref->Deg->DegDec->DegDecCam and Ref->RefCam.
inline bool role_transition_allowed(ClipRole from, ClipRole to) {
    switch (from) {
        case ClipRole::Ref: return to == ClipRole::Deg || to == ClipRole::RefCam;
        case ClipRole::Deg: return to == ClipRole::DegDec;
        case ClipRole::DegDec: return to == ClipRole::DegDecCam;
        default: return false;
    }
}

struct ClipDescriptor {
    uint16_t clip_id = 0;
    std::string name;
    VideoSpec spec;
    ClipRole role = ClipRole::Ref;
    std::filesystem::path storage_path;

    // New descriptor one step further along the chain.
    ClipDescriptor derived(ClipRole to, std::string new_name, std::filesystem::path path) const {
        if (!role_transition_allowed(role, to))
            throw ConsistencyError("illegal clip role transition " + std::string(to_string(role)) +
                                   " -> " + to_string(to));
        ClipDescriptor d = *this;
        d.role = to;
        d.name = std::move(new_name);
        d.storage_path = std::move(path);
        return d;
    }
};

}  // namespace vpcb

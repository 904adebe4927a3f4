#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <variant>

#include "vpcb/core.hpp"

namespace vpcb {

// GOP policy. AllIntra is "GOP 0" (every frame intra, zero decode latency);
// SingleIntra is "GOP -1" (one intra frame for the whole clip).
struct GopMode {
    struct AllIntra {
        bool operator==(const AllIntra&) const = default;
    };
    struct SingleIntra {
        bool operator==(const SingleIntra&) const = default;
    };
    struct FixedFrames {
        int64_t frames = 1;
        bool operator==(const FixedFrames&) const = default;
    };
    struct Seconds {
        double seconds = 1.0;
        bool operator==(const Seconds&) const = default;
    };

    std::variant<AllIntra, SingleIntra, FixedFrames, Seconds> variant = AllIntra{};

    bool operator==(const GopMode&) const = default;

    static GopMode all_intra() { return {AllIntra{}}; }
    static GopMode single_intra() { return {SingleIntra{}}; }
    static GopMode fixed_frames(int64_t n) {
        if (n < 1) throw RangeError("GOP frame count must be >= 1");
        return {FixedFrames{n}};
    }
    static GopMode seconds(double s) {
        if (s <= 0) throw RangeError("GOP duration must be positive");
        return {Seconds{s}};
    }

    // Frames between intra refreshes; 0 means a single intra frame at start.
    int64_t intra_interval(Rational fps) const {
        if (std::holds_alternative<AllIntra>(variant)) return 1;
        if (std::holds_alternative<SingleIntra>(variant)) return 0;
        if (auto* f = std::get_if<FixedFrames>(&variant)) return f->frames;
        double s = std::get<Seconds>(variant).seconds;
        return std::max<int64_t>(1, std::llround(s * fps.as_double()));
    }

    std::string label() const {
        if (std::holds_alternative<AllIntra>(variant)) return "gop0";
        if (std::holds_alternative<SingleIntra>(variant)) return "gop-1";
        if (auto* f = std::get_if<FixedFrames>(&variant))
            return "gop" + std::to_string(f->frames) + "f";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "gop%gs", std::get<Seconds>(variant).seconds);
        return buf;
    }

    // Numeric form passed to external command templates as {gop}:
    // 0 = all-intra, -1 = single intra, otherwise the frame interval.
    int64_t template_value(Rational fps) const {
        if (std::holds_alternative<AllIntra>(variant)) return 0;
        if (std::holds_alternative<SingleIntra>(variant)) return -1;
        return intra_interval(fps);
    }
};

}  // namespace vpcb

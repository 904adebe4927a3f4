#pragma once

#include <map>
#include <sstream>
#include <vector>

#include "vpcb/marker.hpp"

namespace vpcb {

// Captured-frame -> source-frame mapping from decoded corner markers, with
// genlock-event detection (duplicated, skipped, unreadable frames).

struct GenlockEvent {
    enum class Kind { Duplicate, Skip, Unreadable };

    Kind kind = Kind::Unreadable;
    size_t captured_index = 0;
    std::vector<int64_t> detail;  // source indices involved

    bool operator==(const GenlockEvent&) const = default;
};

inline const char* to_string(GenlockEvent::Kind k) {
    switch (k) {
        case GenlockEvent::Kind::Duplicate: return "duplicate";
        case GenlockEvent::Kind::Skip: return "skip";
        case GenlockEvent::Kind::Unreadable: return "unreadable";
    }
    return "?";
}

struct AlignmentEntry {
    size_t captured_index = 0;
    uint32_t source_index = 0;
    int agreement = 0;

    bool operator==(const AlignmentEntry&) const = default;
};

struct AlignmentMap {
    uint16_t clip_id = 0;
    std::vector<AlignmentEntry> entries;  // readable frames only, captured order
    std::vector<GenlockEvent> events;
    size_t trimmed_leading = 0;  // unreadable pre-roll discarded before entry 0
    size_t trimmed_trailing = 0;

    bool has_sync_events() const {
        for (const auto& e : events)
            if (e.kind != GenlockEvent::Kind::Unreadable) return true;
        return false;
    }
};

inline AlignmentMap build_alignment_map(const std::vector<FrameBuffer>& captured,
                                        uint16_t expected_clip_id,
                                        const MarkerGeometry& geometry = {}) {
    if (captured.empty()) throw AlignmentError("cannot align an empty capture");

    std::vector<FrameIdResult> decoded;
    decoded.reserve(captured.size());
    for (const auto& frame : captured) decoded.push_back(decode_frame_id(frame, geometry));

    // Camera start/stop is asynchronous with playback: discard unreadable
    // pre-roll and post-roll.
    size_t first = 0;
    while (first < decoded.size() && !decoded[first].ok()) ++first;
    size_t last = decoded.size();
    while (last > first && !decoded[last - 1].ok()) --last;
    if (first >= last) throw AlignmentError("no readable frame markers in capture");

    std::map<uint16_t, size_t> clip_votes;
    for (size_t i = first; i < last; ++i)
        if (decoded[i].ok()) ++clip_votes[decoded[i].payload->clip_id];
    uint16_t majority_clip = 0;
    size_t majority_count = 0;
    for (auto [id, n] : clip_votes)
        if (n > majority_count) {
            majority_clip = id;
            majority_count = n;
        }
    if (majority_clip != expected_clip_id)
        throw AlignmentError("capture identifies as clip " + std::to_string(majority_clip) +
                             ", expected " + std::to_string(expected_clip_id));

    AlignmentMap map;
    map.clip_id = expected_clip_id;
    map.trimmed_leading = first;
    map.trimmed_trailing = decoded.size() - last;

    for (size_t i = first; i < last; ++i) {
        const auto& d = decoded[i];
        if (!d.ok() || d.payload->clip_id != expected_clip_id) {
            map.events.push_back({GenlockEvent::Kind::Unreadable, i, {}});
            continue;
        }
        map.entries.push_back({i, d.payload->frame_index, d.agreement});
    }

    for (size_t k = 1; k < map.entries.size(); ++k) {
        int64_t prev = map.entries[k - 1].source_index;
        int64_t cur = map.entries[k].source_index;
        if (cur == prev)
            map.events.push_back(
                {GenlockEvent::Kind::Duplicate, map.entries[k].captured_index, {cur}});
        else if (cur != prev + 1)
            map.events.push_back(
                {GenlockEvent::Kind::Skip, map.entries[k].captured_index, {prev, cur}});
    }
    return map;
}

enum class PairPolicy {
    Strict,     // fail on any Duplicate/Skip event
    FirstOfDup  // keep the first captured instance of each source index
};

struct FramePair {
    size_t source_index = 0;
    size_t captured_index = 0;

    bool operator==(const FramePair&) const = default;
};

inline std::string describe_events(const std::vector<GenlockEvent>& events, size_t limit = 8) {
    std::ostringstream os;
    size_t n = 0;
    for (const auto& e : events) {
        if (e.kind == GenlockEvent::Kind::Unreadable) continue;
        if (n++) os << ", ";
        if (n > limit) {
            os << "...";
            break;
        }
        os << to_string(e.kind) << "@" << e.captured_index << "(";
        for (size_t i = 0; i < e.detail.size(); ++i) os << (i ? "->" : "") << e.detail[i];
        os << ")";
    }
    return os.str();
}

// Index pairs (source, captured) in source order; callers index into the
// reference and captured clips.
inline std::vector<FramePair> pair_frames(const AlignmentMap& map, size_t reference_frames,
                                          size_t captured_frames, PairPolicy policy) {
    if (policy == PairPolicy::Strict && map.has_sync_events())
        throw AlignmentError("genlock violation: " + describe_events(map.events));

    std::map<uint32_t, size_t> first_capture;
    for (const auto& e : map.entries) {
        if (e.source_index >= reference_frames)
            throw RangeError("source index " + std::to_string(e.source_index) +
                             " outside reference clip of " + std::to_string(reference_frames) +
                             " frames");
        if (e.captured_index >= captured_frames)
            throw RangeError("captured index " + std::to_string(e.captured_index) +
                             " outside captured clip of " + std::to_string(captured_frames) +
                             " frames");
        first_capture.emplace(e.source_index, e.captured_index);  // keeps the first
    }
    std::vector<FramePair> pairs;
    pairs.reserve(first_capture.size());
    for (auto [src, cap] : first_capture) pairs.push_back({src, cap});
    return pairs;
}

}  // namespace vpcb

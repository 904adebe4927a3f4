#pragma once

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vpcb/alignment.hpp"
#include "vpcb/analysis.hpp"
#include "vpcb/convert.hpp"
#include "vpcb/ladder.hpp"
#include "vpcb/manifest.hpp"
#include "vpcb/report.hpp"
#include "vpcb/version.hpp"

namespace vpcb {

// Experiment pipeline: marker embedding, encode ladders, channel simulation,
// alignment, scoring, curve assembly. Results land in an append-only
// JSON-lines store; completed work units are skipped on rerun. Wall-clock
// readings (timestamps, encode fps) live in each record's "volatile" field so
// the rest of the record is byte-deterministic for a fixed seed.

namespace detail {

inline std::string iso8601_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline uint64_t name_tag(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace detail

class ExperimentStore {
public:
    ExperimentStore(std::filesystem::path path, std::string manifest_hash)
        : path_(std::move(path)), manifest_hash_(std::move(manifest_hash)) {
        std::ifstream in(path_);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const std::exception& e) {
                throw ParseError(path_.string() + ":" + std::to_string(lineno) +
                                 ": bad store record: " + e.what());
            }
            std::string key = j.value("key", "");
            if (key.empty()) continue;
            if (j.value("manifest_hash", "") != manifest_hash_) {
                ++foreign_records_;
                continue;  // never merged with the current manifest's results
            }
            records_[key] = std::move(j);
        }
    }

    bool has(const std::string& key) const { return records_.count(key) != 0; }

    const nlohmann::json* find(const std::string& key) const {
        auto it = records_.find(key);
        return it == records_.end() ? nullptr : &it->second;
    }

    // Appends unless the key already exists. Adds provenance fields.
    bool append(const std::string& kind, const std::string& key, nlohmann::json body,
                nlohmann::json volatile_fields = nlohmann::json::object()) {
        std::lock_guard lock(mutex_);
        if (records_.count(key)) return false;
        body["kind"] = kind;
        body["key"] = key;
        body["manifest_hash"] = manifest_hash_;
        body["tool_version"] = kVersion;
        volatile_fields["timestamp"] = detail::iso8601_now();
        body["volatile"] = std::move(volatile_fields);
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw Error("cannot append to store " + path_.string());
        out << body.dump() << "\n";
        if (!out) throw Error("store write failed: " + path_.string());
        records_[key] = std::move(body);
        return true;
    }

    std::vector<const nlohmann::json*> records_of_kind(const std::string& kind) const {
        std::vector<const nlohmann::json*> out;
        for (const auto& [key, j] : records_)
            if (j.value("kind", "") == kind) out.push_back(&j);
        return out;
    }

    size_t foreign_records() const { return foreign_records_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::string manifest_hash_;
    std::map<std::string, nlohmann::json> records_;  // key -> record, current manifest only
    size_t foreign_records_ = 0;
    std::mutex mutex_;
};

struct ExperimentSummary {
    int planned = 0;
    int completed = 0;
    int skipped = 0;
    int failed = 0;
    std::vector<std::string> failures;

    bool all_failed() const { return planned > 0 && failed == planned; }
};

namespace detail {

// Ordered parallel map: runs fn(i) on `workers` threads, results land in
// input order so store contents stay deterministic.
template <typename Fn>
void parallel_for_ordered(size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    size_t nthreads = std::min<size_t>(static_cast<size_t>(workers), n);
    for (size_t t = 0; t < nthreads; ++t)
        pool.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

inline nlohmann::json quality_json(const QualityRecord& q) {
    nlohmann::json j;
    j["metric"] = q.metric_name;
    j["pooled"] = q.pooled;
    j["pooling"] = q.pooling;
    j["per_frame"] = q.per_frame;
    j["mask"] = q.mask_label;
    j["ref"] = q.ref_name;
    j["dist"] = q.dist_name;
    return j;
}

inline nlohmann::json alignment_json(const AlignmentMap& map, const std::string& capture) {
    nlohmann::json j;
    j["capture"] = capture;
    j["clip_id"] = map.clip_id;
    auto entries = nlohmann::json::array();
    for (const auto& e : map.entries)
        entries.push_back({{"captured_index", e.captured_index},
                           {"source_index", e.source_index},
                           {"agreement", e.agreement}});
    j["entries"] = entries;
    auto events = nlohmann::json::array();
    for (const auto& e : map.events)
        events.push_back({{"kind", to_string(e.kind)},
                          {"captured_index", e.captured_index},
                          {"detail", e.detail}});
    j["events"] = events;
    j["trimmed_leading"] = map.trimmed_leading;
    j["trimmed_trailing"] = map.trimmed_trailing;
    return j;
}

struct PreparedClip {
    ClipSource source;
    ClipDescriptor ref;                // marker-embedded ARef
    std::vector<FrameBuffer> frames;   // ARef frames
};

struct CapturedRef {
    std::vector<FrameBuffer> frames;
    AlignmentMap map;
    std::map<uint32_t, size_t> source_to_captured;
};

}  // namespace detail

class ExperimentRunner {
public:
    explicit ExperimentRunner(const ExperimentManifest& m)
        : m_(m), store_(m.output_dir / "store.jsonl", m.manifest_hash) {
        std::filesystem::create_directories(m_.output_dir / "clips");
        std::filesystem::create_directories(m_.output_dir / "enc");
        std::filesystem::create_directories(m_.output_dir / "tmp");
        if (const char* env = std::getenv("VPCB_WORKERS")) {
            int w = std::atoi(env);
            if (w >= 1) workers_ = w;
        } else {
            workers_ = m_.workers;
        }
    }

    ExperimentStore& store() { return store_; }

    ExperimentSummary run() {
        ExperimentSummary summary;
        for (const auto& clip_src : m_.clips) {
            try {
                run_clip(clip_src, summary);
            } catch (const Error& e) {
                // Clip-level failure: every tuple of this clip is failed.
                int tuples = count_clip_tuples();
                summary.planned += tuples;
                summary.failed += tuples;
                summary.failures.push_back("clip " + clip_src.name + ": " + e.what());
            }
        }
        append_curves(summary);
        return summary;
    }

    // Curves recomputed from ladder/quality records (never from stale curve
    // snapshots), grouped for reporting.
    std::vector<ReportCurve> collect_curves() const {
        std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>,
                 std::vector<CurvePoint>>
            groups;
        std::map<std::string, double> bitrate_by_ladder_key;
        for (const auto* j : store_.records_of_kind("ladder_point"))
            bitrate_by_ladder_key[j->value("key", "")] = j->value("bitrate_mbps", 0.0);
        for (const auto* j : store_.records_of_kind("quality")) {
            std::string ladder_key = "ladder:" + j->value("clip", "") + "/" + j->value("codec", "") +
                                     "/" + j->value("gop", "") + "/" +
                                     std::to_string(j->value("rate_param", 0));
            auto it = bitrate_by_ladder_key.find(ladder_key);
            if (it == bitrate_by_ladder_key.end()) continue;
            groups[{j->value("clip", ""), j->value("codec", ""), j->value("gop", ""),
                    j->value("mode", ""), j->value("metric", "")}]
                .push_back({it->second, j->value("pooled", 0.0)});
        }
        std::vector<ReportCurve> out;
        for (const auto& [key, pts] : groups) {
            ReportCurve rc;
            rc.curve.clip_name = std::get<0>(key);
            rc.curve.codec_name = std::get<1>(key);
            rc.curve.gop_label = std::get<2>(key);
            rc.mode = std::get<3>(key);
            rc.curve.metric_name = std::get<4>(key);
            rc.curve.points = pareto_filter(pts);
            out.push_back(std::move(rc));
        }
        return out;
    }

private:
    struct GopSlot {
        const CodecConfig* codec;
        std::optional<GopMode> gop;  // nullopt for GOP-free codecs

        CodecConfig configured() const {
            CodecConfig c = *codec;
            c.gop = gop;
            return c;
        }
        std::string gop_label() const { return gop ? gop->label() : "na"; }
    };

    // GOP-free codecs contribute one slot; others one per manifest GOP mode.
    std::vector<GopSlot> gop_slots() const {
        std::vector<GopSlot> slots;
        for (const auto& codec : m_.codecs) {
            if (codec.gop_free) {
                slots.push_back({&codec, std::nullopt});
            } else {
                for (const auto& gop : m_.gop_modes) slots.push_back({&codec, gop});
            }
        }
        return slots;
    }

    int count_clip_tuples() const {
        // Upper bound used when a whole clip fails before ladder resolution.
        int ladder_points = m_.ladder.mode == LadderSpec::Mode::Jnd ? m_.ladder.point_count : 0;
        if (m_.ladder.mode == LadderSpec::Mode::Explicit)
            for (const auto& [codec, pts] : m_.ladder.explicit_points)
                ladder_points = std::max<int>(ladder_points, static_cast<int>(pts.size()));
        return static_cast<int>(gop_slots().size()) * ladder_points *
               static_cast<int>(m_.modes.size());
    }

    std::vector<std::string> enabled_metrics() const {
        std::vector<std::string> names;
        if (m_.metrics.native_psnr) names.push_back("psnr");
        for (const auto& r : m_.metrics.runners) names.push_back(r.name);
        return names;
    }

    detail::PreparedClip prepare_clip(const ClipSource& src) {
        detail::PreparedClip pc;
        pc.source = src;

        VideoSpec spec;
        std::vector<FrameBuffer> plain;
        if (src.path) {
            Y4mClip y = read_y4m_file(*src.path);
            spec = y.spec;
            plain = std::move(y.frames);
        } else {
            spec = src.synthetic->spec;
            plain = generate_synthetic_clip(src.synthetic->kind, spec,
                                            mix_seed(m_.seed, src.clip_id, 0xc11b));
        }
        if (plain.empty()) throw DimensionError("clip " + src.name + " has no frames");

        pc.frames.reserve(plain.size());
        for (size_t i = 0; i < plain.size(); ++i)
            pc.frames.push_back(embed_markers(
                plain[i], MarkerPayload::make(src.clip_id, static_cast<uint32_t>(i)),
                m_.marker_geometry));

        auto ref_path = m_.output_dir / "clips" / (src.name + ".ref.y4m");
        if (!std::filesystem::exists(ref_path)) write_y4m_file(ref_path, spec, pc.frames);
        pc.ref = ClipDescriptor{src.clip_id, src.name, spec, ClipRole::Ref, ref_path};
        return pc;
    }

    uint64_t capture_seed(const ClipSource& src, const std::string& mode,
                          const std::string& capture_id) const {
        return mix_seed(m_.seed, src.clip_id, detail::name_tag(mode),
                        detail::name_tag(capture_id));
    }

    const detail::CapturedRef& captured_ref(const detail::PreparedClip& pc,
                                            const std::string& mode) {
        auto key = pc.source.name + "/" + mode;
        auto it = refcam_cache_.find(key);
        if (it != refcam_cache_.end()) return it->second;

        ChannelConfig cfg = m_.channels.at(mode).with_seed(capture_seed(pc.source, mode, "ref"));
        ChannelOutput out = apply_channel(pc.frames, cfg);
        detail::CapturedRef cr;
        cr.frames = std::move(out.frames);
        cr.map = build_alignment_map(cr.frames, pc.source.clip_id, m_.marker_geometry);
        for (const auto& e : cr.map.entries) cr.source_to_captured.emplace(e.source_index, e.captured_index);
        store_.append("alignment", "alignment:" + pc.source.name + "/" + mode + "/ref",
                      [&] {
                          auto j = detail::alignment_json(cr.map, "ref");
                          j["clip"] = pc.source.name;
                          j["mode"] = mode;
                          return j;
                      }());
        return refcam_cache_.emplace(key, std::move(cr)).first->second;
    }

    struct EncodedPoint {
        LadderPoint point;
        std::vector<FrameBuffer> decoded;
    };

    static std::string encode_key(const detail::PreparedClip& pc, const GopSlot& slot,
                                  int rate_param) {
        return pc.source.name + "/" + slot.codec->codec_name + "/" + slot.gop_label() + "/" +
               std::to_string(rate_param);
    }

    const EncodedPoint& encoded_point(const detail::PreparedClip& pc, const GopSlot& slot,
                                      int rate_param) {
        std::string key = encode_key(pc, slot, rate_param);
        auto it = encode_cache_.find(key);
        if (it != encode_cache_.end()) return it->second;

        CodecConfig cfg = slot.configured();
        LadderPoint pt = encode(pc.ref, cfg, rate_param, m_.output_dir / "enc");
        Y4mClip dec = read_y4m_file(pt.decoded_clip.storage_path);
        EncodedPoint ep{std::move(pt), std::move(dec.frames)};
        return encode_cache_.emplace(key, std::move(ep)).first->second;
    }

    // Quality of one decoded ladder point against the reference, direct mode.
    double direct_quality(const detail::PreparedClip& pc, const EncodedPoint& ep,
                          const std::string& metric) {
        return score_direct(pc, ep, metric).pooled;
    }

    std::vector<int> resolve_ladder(const detail::PreparedClip& pc, const GopSlot& slot,
                                    ExperimentSummary& summary) {
        const std::string codec = slot.codec->codec_name;
        const std::string gop = slot.gop_label();
        const std::string params_key = "ladder_params:" + pc.source.name + "/" + codec + "/" + gop;
        if (const nlohmann::json* j = store_.find(params_key))
            return j->at("rate_params").get<std::vector<int>>();

        std::vector<int> params;
        bool warned = false;
        if (m_.ladder.mode == LadderSpec::Mode::Explicit) {
            auto it = m_.ladder.explicit_points.find(codec);
            if (it == m_.ladder.explicit_points.end()) return {};
            params = it->second;
            std::sort(params.begin(), params.end());
            params.erase(std::unique(params.begin(), params.end()), params.end());
        } else {
            LadderSearchResult res = build_jnd_ladder(
                slot.codec->rate_min, slot.codec->rate_max,
                [&](int p) { return direct_quality(pc, encoded_point(pc, slot, p), m_.ladder.metric); },
                m_.ladder.jnd_step, m_.ladder.quality_floor, m_.ladder.point_count);
            params = res.rate_params;
            warned = res.monotonicity_warning;
            if (warned)
                summary.failures.push_back("warning: non-monotone quality for " + pc.source.name +
                                           "/" + codec + "/" + gop);
        }
        store_.append("ladder_params", params_key,
                      {{"clip", pc.source.name},
                       {"codec", codec},
                       {"gop", gop},
                       {"rate_params", params},
                       {"monotonicity_warning", warned}});
        return params;
    }

    struct TupleWork {
        const GopSlot* slot;
        int rate_param;
        std::string mode;
        bool needs_anything = false;
    };

    void run_clip(const ClipSource& src, ExperimentSummary& summary) {
        detail::PreparedClip pc = prepare_clip(src);

        const auto slots = gop_slots();
        const auto metrics = enabled_metrics();

        // Resolve ladders (sequential; JND probes bisect one at a time).
        std::map<size_t, std::vector<int>> params_by_slot;
        for (size_t si = 0; si < slots.size(); ++si) {
            try {
                params_by_slot[si] = resolve_ladder(pc, slots[si], summary);
            } catch (const Error& e) {
                int expected_params = m_.ladder.point_count;
                if (m_.ladder.mode == LadderSpec::Mode::Explicit) {
                    auto it = m_.ladder.explicit_points.find(slots[si].codec->codec_name);
                    expected_params =
                        it == m_.ladder.explicit_points.end() ? 0 : static_cast<int>(it->second.size());
                }
                int tuples = static_cast<int>(m_.modes.size()) * expected_params;
                summary.planned += tuples;
                summary.failed += tuples;
                summary.failures.push_back("ladder " + src.name + "/" +
                                           slots[si].codec->codec_name + "/" +
                                           slots[si].gop_label() + ": " + e.what());
            }
        }

        // Plan tuples.
        std::vector<TupleWork> tuples;
        for (size_t si = 0; si < slots.size(); ++si) {
            if (!params_by_slot.count(si)) continue;
            for (int param : params_by_slot[si])
                for (const auto& mode : m_.modes) tuples.push_back({&slots[si], param, mode});
        }
        summary.planned += static_cast<int>(tuples.size());

        // Decide what needs computing, then run the missing encodes with up
        // to `workers` concurrent backend invocations. Each (slot, param)
        // owns distinct artifact paths; results merge into the cache in a
        // deterministic order before the scoring phase reads it.
        std::vector<std::pair<size_t, int>> pending;
        for (auto& t : tuples) {
            t.needs_anything = !tuple_complete(pc, t, metrics);
            if (!t.needs_anything) continue;
            size_t si = static_cast<size_t>(t.slot - slots.data());
            if (!encode_cache_.count(encode_key(pc, *t.slot, t.rate_param)) &&
                std::find(pending.begin(), pending.end(), std::make_pair(si, t.rate_param)) ==
                    pending.end())
                pending.emplace_back(si, t.rate_param);
        }
        std::vector<std::optional<EncodedPoint>> encoded(pending.size());
        detail::parallel_for_ordered(pending.size(), workers_, [&](size_t i) {
            try {
                CodecConfig cfg = slots[pending[i].first].configured();
                LadderPoint pt = encode(pc.ref, cfg, pending[i].second, m_.output_dir / "enc");
                Y4mClip dec = read_y4m_file(pt.decoded_clip.storage_path);
                encoded[i] = EncodedPoint{std::move(pt), std::move(dec.frames)};
            } catch (const Error&) {
                // surfaced again inside the tuple phase
            }
        });
        for (size_t i = 0; i < pending.size(); ++i)
            if (encoded[i])
                encode_cache_.emplace(
                    encode_key(pc, slots[pending[i].first], pending[i].second),
                    std::move(*encoded[i]));
        for (const auto& t : tuples)
            if (t.needs_anything && t.mode != "direct") captured_ref_guarded(pc, t.mode);

        // Score tuples (parallel, ordered record append).
        std::vector<std::vector<std::pair<std::string, nlohmann::json>>> tuple_records(
            tuples.size());
        std::vector<std::vector<std::pair<std::string, nlohmann::json>>> tuple_volatile(
            tuples.size());
        std::vector<std::string> tuple_errors(tuples.size());
        detail::parallel_for_ordered(tuples.size(), workers_, [&](size_t i) {
            try {
                if (tuples[i].needs_anything)
                    score_tuple(pc, tuples[i], metrics, tuple_records[i], tuple_volatile[i]);
            } catch (const Error& e) {
                tuple_errors[i] = e.what();
            } catch (const std::exception& e) {
                tuple_errors[i] = std::string("unexpected: ") + e.what();
            }
        });

        for (size_t i = 0; i < tuples.size(); ++i) {
            const auto& t = tuples[i];
            std::string label = src.name + "/" + t.slot->codec->codec_name + "/" +
                                t.slot->gop_label() + "/" + std::to_string(t.rate_param) + "/" +
                                t.mode;
            if (!tuple_errors[i].empty()) {
                ++summary.failed;
                summary.failures.push_back(label + ": " + tuple_errors[i]);
                continue;
            }
            if (!t.needs_anything) {
                ++summary.skipped;
                continue;
            }
            for (size_t r = 0; r < tuple_records[i].size(); ++r) {
                auto& [key, body] = tuple_records[i][r];
                std::string kind = body["kind"].get<std::string>();
                body.erase("kind");
                nlohmann::json vol = nlohmann::json::object();
                for (auto& [vk, vbody] : tuple_volatile[i])
                    if (vk == key) vol = vbody;
                store_.append(kind, key, std::move(body), std::move(vol));
            }
            ++summary.completed;
        }
    }

    // captured_ref with per-mode failure isolation.
    void captured_ref_guarded(const detail::PreparedClip& pc, const std::string& mode) {
        try {
            captured_ref(pc, mode);
        } catch (const Error&) {
            // tuples for this mode will re-hit and report the failure
        }
    }

    bool tuple_complete(const detail::PreparedClip& pc, const TupleWork& t,
                        const std::vector<std::string>& metrics) const {
        std::string base = pc.source.name + "/" + t.slot->codec->codec_name + "/" +
                           t.slot->gop_label() + "/" + std::to_string(t.rate_param);
        if (!store_.has("ladder:" + base)) return false;
        for (const auto& metric : metrics)
            if (!store_.has("quality:" + base + "/" + t.mode + "/" + metric)) return false;
        if (t.mode != "direct" &&
            !store_.has("alignment:" + pc.source.name + "/" + t.mode + "/" +
                        t.slot->codec->codec_name + "." + t.slot->gop_label() + "." +
                        std::to_string(t.rate_param)))
            return false;
        return true;
    }

    void score_tuple(const detail::PreparedClip& pc, const TupleWork& t,
                     const std::vector<std::string>& metrics,
                     std::vector<std::pair<std::string, nlohmann::json>>& records,
                     std::vector<std::pair<std::string, nlohmann::json>>& volatile_fields) {
        const EncodedPoint& ep = encoded_point_const(pc, t);
        std::string base = pc.source.name + "/" + t.slot->codec->codec_name + "/" +
                           t.slot->gop_label() + "/" + std::to_string(t.rate_param);

        {
            nlohmann::json j;
            j["kind"] = "ladder_point";
            j["clip"] = pc.source.name;
            j["codec"] = ep.point.codec_name;
            j["gop"] = t.slot->gop_label();
            j["rate_param"] = ep.point.rate_param;
            j["rate_label"] = ep.point.rate_label;
            j["encoded_path"] =
                std::filesystem::relative(ep.point.encoded_path, m_.output_dir).string();
            j["decoded_path"] =
                std::filesystem::relative(ep.point.decoded_clip.storage_path, m_.output_dir)
                    .string();
            j["encoded_bytes"] = ep.point.encoded_bytes;
            j["bitrate_mbps"] = ep.point.bitrate_mbps;
            j["frames"] = pc.ref.spec.frame_count;
            j["decoded_role"] = to_string(ep.point.decoded_clip.role);
            records.emplace_back("ladder:" + base, std::move(j));
            volatile_fields.emplace_back("ladder:" + base,
                                         nlohmann::json{{"encode_seconds", ep.point.encode_seconds},
                                                        {"encode_fps", ep.point.encode_fps}});
        }

        if (t.mode == "direct") {
            for (const auto& metric : metrics) {
                QualityRecord q = score_direct(pc, ep, metric);
                nlohmann::json j = detail::quality_json(q);
                j["kind"] = "quality";
                j["clip"] = pc.source.name;
                j["codec"] = ep.point.codec_name;
                j["gop"] = t.slot->gop_label();
                j["rate_param"] = ep.point.rate_param;
                j["mode"] = t.mode;
                records.emplace_back("quality:" + base + "/" + t.mode + "/" + metric,
                                     std::move(j));
            }
            return;
        }

        // In-camera mode: push DegDec through the channel, align both
        // captures, score over the common source frames.
        const detail::CapturedRef& rc = captured_ref_for_scoring(pc, t.mode);
        ChannelConfig cfg = m_.channels.at(t.mode).with_seed(capture_seed(
            pc.source, t.mode,
            ep.point.codec_name + "." + t.slot->gop_label() + "." + std::to_string(t.rate_param)));
        ChannelOutput cap = apply_channel(ep.decoded, cfg);
        AlignmentMap cap_map = build_alignment_map(cap.frames, pc.source.clip_id, m_.marker_geometry);

        {
            nlohmann::json j = detail::alignment_json(
                cap_map, ep.point.codec_name + "." + t.slot->gop_label() + "." +
                             std::to_string(t.rate_param));
            j["kind"] = "alignment";
            j["clip"] = pc.source.name;
            j["mode"] = t.mode;
            records.emplace_back("alignment:" + pc.source.name + "/" + t.mode + "/" +
                                     ep.point.codec_name + "." + t.slot->gop_label() + "." +
                                     std::to_string(t.rate_param),
                                 std::move(j));
        }

        auto cap_pairs = pair_frames(cap_map, pc.frames.size(), cap.frames.size(),
                                     PairPolicy::FirstOfDup);
        std::vector<const FrameBuffer*> ref_side, dist_side;
        for (const auto& p : cap_pairs) {
            auto it = rc.source_to_captured.find(static_cast<uint32_t>(p.source_index));
            if (it == rc.source_to_captured.end()) continue;
            ref_side.push_back(&rc.frames[it->second]);
            dist_side.push_back(&cap.frames[p.captured_index]);
        }
        if (ref_side.empty())
            throw AlignmentError("no common source frames between reference and degraded captures");

        for (const auto& metric : metrics) {
            QualityRecord q;
            if (metric == "psnr") {
                q = psnr_sequence(ref_side, dist_side,
                                  RegionMask::exclude_markers(m_.marker_geometry));
                q.ref_name = pc.source.name + "/refcam";
                q.dist_name = base + "/degdeccam";
            } else {
                const MetricRunner* runner = m_.find_runner(metric);
                if (!runner) throw ConsistencyError("metric \"" + metric + "\" is not declared");
                auto tmp = m_.output_dir / "tmp";
                std::string stem = pc.source.name + "." + ep.point.codec_name + "." +
                                   t.slot->gop_label() + "." + std::to_string(t.rate_param) + "." +
                                   t.mode;
                auto ref_y4m = tmp / (stem + ".refcam.y4m");
                auto dist_y4m = tmp / (stem + ".degcam.y4m");
                VideoSpec cap_spec = VideoSpec::for_frames(
                    ref_side.front()->fmt, pc.ref.spec.frame_rate,
                    static_cast<int64_t>(ref_side.size()));
                std::vector<FrameBuffer> ref_copy, dist_copy;
                for (const auto* f : ref_side) ref_copy.push_back(*f);
                for (const auto* f : dist_side) dist_copy.push_back(*f);
                write_y4m_file(ref_y4m, cap_spec, ref_copy);
                write_y4m_file(dist_y4m, cap_spec, dist_copy);
                q = run_external_metric(*runner, ref_y4m, dist_y4m, tmp / (stem + ".json"));
                q.ref_name = ref_y4m.filename().string();
                q.dist_name = dist_y4m.filename().string();
            }
            nlohmann::json j = detail::quality_json(q);
            j["kind"] = "quality";
            j["clip"] = pc.source.name;
            j["codec"] = ep.point.codec_name;
            j["gop"] = t.slot->gop_label();
            j["rate_param"] = ep.point.rate_param;
            j["mode"] = t.mode;
            j["paired_frames"] = ref_side.size();
            records.emplace_back("quality:" + base + "/" + t.mode + "/" + metric, std::move(j));
        }
    }

    QualityRecord score_direct(const detail::PreparedClip& pc, const EncodedPoint& ep,
                               const std::string& metric) {
        if (metric == "psnr") {
            QualityRecord q;
            if (!ep.decoded.empty() && ep.decoded.front().fmt != pc.frames.front().fmt) {
                // Comparisons run at a common format: both sides at the
                // higher bit depth and 4:4:4.
                int depth = std::max(pc.frames.front().fmt.bit_depth,
                                     ep.decoded.front().fmt.bit_depth);
                q = psnr_sequence(convert_clip(pc.frames, Chroma::C444, depth),
                                  convert_clip(ep.decoded, Chroma::C444, depth),
                                  RegionMask::exclude_markers(m_.marker_geometry));
            } else {
                q = psnr_sequence(pc.frames, ep.decoded,
                                  RegionMask::exclude_markers(m_.marker_geometry));
            }
            q.ref_name = pc.source.name + "/ref";
            q.dist_name = ep.point.decoded_clip.name;
            return q;
        }
        const MetricRunner* runner = m_.find_runner(metric);
        if (!runner) throw ConsistencyError("metric \"" + metric + "\" is not declared");
        auto out = m_.output_dir / "tmp" /
                   (pc.source.name + "." + ep.point.codec_name + "." +
                    (ep.point.gop ? ep.point.gop->label() : "na") + "." + ep.point.rate_label +
                    ".direct." + metric + ".json");
        QualityRecord q = run_external_metric(*runner, pc.ref.storage_path,
                                              ep.point.decoded_clip.storage_path, out);
        return q;
    }

    // Read-only accessors for the parallel phase (caches are pre-populated).
    const EncodedPoint& encoded_point_const(const detail::PreparedClip& pc, const TupleWork& t) {
        std::lock_guard lock(cache_mutex_);
        return encoded_point(pc, *t.slot, t.rate_param);
    }
    const detail::CapturedRef& captured_ref_for_scoring(const detail::PreparedClip& pc,
                                                        const std::string& mode) {
        std::lock_guard lock(cache_mutex_);
        return captured_ref(pc, mode);
    }

    void append_curves(ExperimentSummary&) {
        for (const auto& rc : collect_curves()) {
            std::string key = "curve:" + rc.curve.clip_name + "/" + rc.curve.codec_name + "/" +
                              rc.curve.gop_label + "/" + rc.mode + "/" + rc.curve.metric_name;
            nlohmann::json j;
            j["clip"] = rc.curve.clip_name;
            j["codec"] = rc.curve.codec_name;
            j["gop"] = rc.curve.gop_label;
            j["mode"] = rc.mode;
            j["metric"] = rc.curve.metric_name;
            auto pts = nlohmann::json::array();
            for (const auto& p : rc.curve.points)
                pts.push_back({{"bitrate_mbps", p.bitrate_mbps}, {"quality", p.quality}});
            j["points"] = pts;
            store_.append("curve", key, std::move(j));
        }
    }

    const ExperimentManifest& m_;
    ExperimentStore store_;
    int workers_ = 1;
    std::map<std::string, EncodedPoint> encode_cache_;
    std::map<std::string, detail::CapturedRef> refcam_cache_;
    std::mutex cache_mutex_;
};

inline ExperimentSummary run_experiment(const ExperimentManifest& manifest) {
    ExperimentRunner runner(manifest);
    return runner.run();
}

}  // namespace vpcb

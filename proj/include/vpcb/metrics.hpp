#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpcb/channel.hpp"
#include "vpcb/harness.hpp"
#include "vpcb/marker.hpp"

namespace vpcb {

// Quality metrics: native luma PSNR plus a command protocol for external
// perceptual metric tools (VMAF, ColorVideoVDP). Pooling is the arithmetic
// mean of per-frame scores.

// Zero-MSE sentinel; also the upper cap so pooled means stay finite.
constexpr double kPsnrCap = 99.0;

struct RegionMask {
    enum class Kind { Full, ExcludeMarkers, Roi };

    Kind kind = Kind::Full;
    MarkerGeometry geometry{};  // ExcludeMarkers
    RectRoi roi{};              // Roi

    static RegionMask full() { return {}; }
    static RegionMask exclude_markers(const MarkerGeometry& g = {}) {
        return {Kind::ExcludeMarkers, g, {}};
    }
    static RegionMask region(const RectRoi& r) { return {Kind::Roi, {}, r}; }

    std::string label() const {
        switch (kind) {
            case Kind::Full: return "full";
            case Kind::ExcludeMarkers: return "exclude_markers";
            case Kind::Roi:
                return "roi:" + std::to_string(roi.x) + "," + std::to_string(roi.y) + "," +
                       std::to_string(roi.width) + "," + std::to_string(roi.height);
        }
        return "?";
    }
};

struct QualityRecord {
    std::string metric_name;
    std::vector<double> per_frame;
    double pooled = 0;
    std::string pooling = "arithmetic_mean";
    std::string ref_name;
    std::string dist_name;
    std::string mask_label = "full";
};

inline double psnr_frame(const FrameBuffer& ref, const FrameBuffer& dist,
                         const RegionMask& mask = {}) {
    if (ref.fmt.width != dist.fmt.width || ref.fmt.height != dist.fmt.height ||
        ref.fmt.bit_depth != dist.fmt.bit_depth)
        throw DimensionError("psnr_frame requires matching dimensions and bit depth");

    const int w = ref.fmt.width, h = ref.fmt.height;
    std::array<std::pair<int, int>, 4> corners{};
    int marker_size = 0;
    if (mask.kind == RegionMask::Kind::ExcludeMarkers) {
        corners = marker_corners(ref.fmt, mask.geometry);
        marker_size = mask.geometry.size_px();
    }
    int rx0 = 0, ry0 = 0, rx1 = w, ry1 = h;
    if (mask.kind == RegionMask::Kind::Roi) {
        if (mask.roi.x < 0 || mask.roi.y < 0 || mask.roi.width <= 0 || mask.roi.height <= 0 ||
            mask.roi.x + mask.roi.width > w || mask.roi.y + mask.roi.height > h)
            throw GeometryError("metric roi outside frame");
        rx0 = mask.roi.x;
        ry0 = mask.roi.y;
        rx1 = rx0 + mask.roi.width;
        ry1 = ry0 + mask.roi.height;
    }

    double sum_sq = 0;
    int64_t n = 0;
    for (int y = ry0; y < ry1; ++y) {
        for (int x = rx0; x < rx1; ++x) {
            if (mask.kind == RegionMask::Kind::ExcludeMarkers) {
                bool in_marker = false;
                for (auto [mx, my] : corners)
                    if (x >= mx && x < mx + marker_size && y >= my && y < my + marker_size) {
                        in_marker = true;
                        break;
                    }
                if (in_marker) continue;
            }
            double d = static_cast<double>(ref.y[static_cast<size_t>(y) * w + x]) -
                       static_cast<double>(dist.y[static_cast<size_t>(y) * w + x]);
            sum_sq += d * d;
            ++n;
        }
    }
    if (n == 0) throw DimensionError("metric mask excludes every sample");
    double mse = sum_sq / static_cast<double>(n);
    if (mse == 0) return kPsnrCap;
    double peak = static_cast<double>(ref.fmt.max_value());
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

inline QualityRecord psnr_sequence(const std::vector<const FrameBuffer*>& refs,
                                   const std::vector<const FrameBuffer*>& dists,
                                   const RegionMask& mask = {}) {
    if (refs.empty() || refs.size() != dists.size())
        throw DimensionError("psnr_sequence needs one or more equal-length frame pairs");
    QualityRecord rec;
    rec.metric_name = "psnr";
    rec.mask_label = mask.label();
    double sum = 0;
    for (size_t i = 0; i < refs.size(); ++i) {
        double v = psnr_frame(*refs[i], *dists[i], mask);
        rec.per_frame.push_back(v);
        sum += v;
    }
    rec.pooled = sum / static_cast<double>(rec.per_frame.size());
    return rec;
}

inline QualityRecord psnr_sequence(const std::vector<FrameBuffer>& refs,
                                   const std::vector<FrameBuffer>& dists,
                                   const RegionMask& mask = {}) {
    std::vector<const FrameBuffer*> r, d;
    for (const auto& f : refs) r.push_back(&f);
    for (const auto& f : dists) d.push_back(&f);
    return psnr_sequence(r, d, mask);
}

// External metric runner declaration. The command template must reference
// {ref}, {dist} and {out}; the tool writes JSON
//   {"metric": <name>, "frames": [{"score": <number>}, ...]}
// to {out}.
struct MetricRunner {
    std::string name;
    std::string command_template;
    double score_min = 0;
    double score_max = 100;
};

inline QualityRecord run_external_metric(const MetricRunner& runner,
                                         const std::filesystem::path& ref_path,
                                         const std::filesystem::path& dist_path,
                                         const std::filesystem::path& out_path) {
    for (const char* ph : {"{ref}", "{dist}", "{out}"})
        if (runner.command_template.find(ph) == std::string::npos)
            throw ConsistencyError("runner " + runner.name + " template lacks placeholder " + ph);

    std::string cmd = expand_template(runner.command_template, {{"ref", ref_path.string()},
                                                                {"dist", dist_path.string()},
                                                                {"out", out_path.string()}});
    std::filesystem::path stderr_path = out_path.string() + ".stderr.log";
    CommandResult cr = run_command(cmd, out_path.string() + ".stdout.log", stderr_path);
    if (cr.exit_code != 0)
        throw ProcessError("metric runner " + runner.name + " failed (exit " +
                           std::to_string(cr.exit_code) + "): " + read_text_file(stderr_path));

    std::ifstream in(out_path);
    if (!in) throw ProcessError("metric runner " + runner.name + " wrote no output file");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError("metric runner " + runner.name + " output is not valid JSON: " + e.what());
    }
    if (!doc.contains("frames") || !doc["frames"].is_array() || doc["frames"].empty())
        throw ParseError("metric runner " + runner.name + " output lacks a frames list");

    QualityRecord rec;
    rec.metric_name = runner.name;
    rec.ref_name = ref_path.string();
    rec.dist_name = dist_path.string();
    double sum = 0;
    for (const auto& f : doc["frames"]) {
        if (!f.contains("score") || !f["score"].is_number())
            throw ParseError("metric runner " + runner.name + " frame entry lacks a score");
        double s = f["score"].get<double>();
        if (s < runner.score_min || s > runner.score_max)
            throw RangeError("metric " + runner.name + " score " + std::to_string(s) +
                             " outside [" + std::to_string(runner.score_min) + ", " +
                             std::to_string(runner.score_max) + "]");
        rec.per_frame.push_back(s);
        sum += s;
    }
    rec.pooled = sum / static_cast<double>(rec.per_frame.size());
    return rec;
}

struct FloorStats {
    double max_db = 0;
    double min_db = 0;
    double range_db = 0;
    double mean_db = 0;
};

inline FloorStats summarize_floor(const std::vector<double>& scores) {
    if (scores.size() < 2) throw DimensionError("noise floor needs at least 2 captures");
    FloorStats s;
    s.max_db = scores[0];
    s.min_db = scores[0];
    double sum = 0;
    for (double v : scores) {
        s.max_db = std::max(s.max_db, v);
        s.min_db = std::min(s.min_db, v);
        sum += v;
    }
    s.range_db = s.max_db - s.min_db;
    s.mean_db = sum / static_cast<double>(scores.size());
    return s;
}

// Scores each repeat capture against the reference capture and reports order
// statistics. The reference is itself one capture of the chain, so with
// additive noise sigma the expected level is psnr(sigma * sqrt(2)).
inline FloorStats noise_floor(const std::vector<std::vector<FrameBuffer>>& repeat_captures,
                              const std::vector<FrameBuffer>& reference_capture,
                              const RegionMask& mask = {}) {
    if (repeat_captures.size() < 2) throw DimensionError("noise floor needs at least 2 captures");
    std::vector<double> pooled;
    for (const auto& capture : repeat_captures) {
        if (capture.size() != reference_capture.size())
            throw DimensionError("capture length differs from reference; align captures first");
        pooled.push_back(psnr_sequence(reference_capture, capture, mask).pooled);
    }
    return summarize_floor(pooled);
}

}  // namespace vpcb

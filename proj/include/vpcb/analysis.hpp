#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpcb/harness.hpp"
#include "vpcb/metrics.hpp"

namespace vpcb {

// Rate-quality curves and threshold-based bitrate-savings tables.

struct CurvePoint {
    double bitrate_mbps = 0;
    double quality = 0;

    bool operator==(const CurvePoint&) const = default;
};

struct RateQualityCurve {
    std::string codec_name;
    std::string clip_name;
    std::string gop_label = "na";  // "na" for codecs without a GOP concept
    std::string metric_name;
    std::vector<CurvePoint> points;  // Pareto-filtered, bitrate ascending
};

// Keeps only non-dominated points: drops any point for which another point
// has <= bitrate and >= quality with at least one strict. The result is
// strictly increasing in both bitrate and quality, independent of input order.
inline std::vector<CurvePoint> pareto_filter(std::vector<CurvePoint> points) {
    std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.bitrate_mbps != b.bitrate_mbps) return a.bitrate_mbps < b.bitrate_mbps;
        return a.quality > b.quality;
    });
    std::vector<CurvePoint> kept;
    double best_quality = -1e300;
    for (const auto& p : points) {
        if (p.quality > best_quality) {
            kept.push_back(p);
            best_quality = p.quality;
        }
    }
    return kept;
}

inline RateQualityCurve build_curve(
    const std::vector<std::pair<LadderPoint, QualityRecord>>& records) {
    if (records.empty()) throw DimensionError("build_curve needs at least one record");
    RateQualityCurve curve;
    curve.codec_name = records.front().first.codec_name;
    curve.clip_name = records.front().first.source_clip;
    curve.gop_label = records.front().first.gop ? records.front().first.gop->label() : "na";
    curve.metric_name = records.front().second.metric_name;

    std::vector<CurvePoint> pts;
    for (const auto& [pt, q] : records) {
        if (pt.codec_name != curve.codec_name || pt.source_clip != curve.clip_name)
            throw ConsistencyError("build_curve saw mixed codec/clip records");
        std::string gl = pt.gop ? pt.gop->label() : "na";
        if (gl != curve.gop_label) throw ConsistencyError("build_curve saw mixed GOP modes");
        if (q.metric_name != curve.metric_name)
            throw ConsistencyError("build_curve saw mixed metrics (" + q.metric_name + " vs " +
                                   curve.metric_name + ")");
        pts.push_back({pt.bitrate_mbps, q.pooled});
    }
    curve.points = pareto_filter(std::move(pts));
    return curve;
}

// Minimum bitrate at which the curve reaches `threshold`, interpolating
// quality linearly against log10(bitrate) between the bracketing points.
// nullopt stands for an N/A table cell: the codec cannot attain the score.
inline std::optional<double> min_bitrate_at_quality(const RateQualityCurve& curve,
                                                    double threshold) {
    const auto& pts = curve.points;
    if (pts.empty()) return std::nullopt;
    if (pts.back().quality < threshold) return std::nullopt;
    if (pts.front().quality >= threshold) return pts.front().bitrate_mbps;
    for (size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].quality < threshold) continue;
        if (pts[i].quality == threshold) return pts[i].bitrate_mbps;
        const auto& a = pts[i - 1];
        const auto& b = pts[i];
        double t = (threshold - a.quality) / (b.quality - a.quality);
        double logb = std::log10(a.bitrate_mbps) +
                      t * (std::log10(b.bitrate_mbps) - std::log10(a.bitrate_mbps));
        return std::pow(10.0, logb);
    }
    return std::nullopt;  // unreachable: guarded by the back() check
}

inline double savings_ratio(double reference_min_mbps, double candidate_min_mbps) {
    if (reference_min_mbps <= 0 || candidate_min_mbps <= 0)
        throw RangeError("savings ratio requires positive bitrates");
    return reference_min_mbps / candidate_min_mbps;
}

struct SavingsCell {
    double min_bitrate_mbps = 0;
    double ratio = 0;
};

struct SavingsRow {
    std::string codec_name;
    std::vector<std::optional<SavingsCell>> cells;  // per clip; nullopt = N/A
    std::optional<double> average;                  // over available ratios only
};

struct SavingsTable {
    std::string reference_codec;
    double threshold = 0;
    std::string metric_name;
    std::vector<std::string> clip_names;
    std::vector<double> reference_bitrates;  // reference's min bitrate per clip
    std::vector<SavingsRow> rows;
    std::vector<std::string> warnings;
};

inline std::optional<double> average_available(const std::vector<std::optional<double>>& ratios) {
    double sum = 0;
    size_t n = 0;
    for (const auto& r : ratios)
        if (r) {
            sum += *r;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

inline SavingsTable savings_table(const std::vector<RateQualityCurve>& curves,
                                  const std::string& reference_codec, double threshold) {
    if (curves.empty()) throw DimensionError("savings_table needs at least one curve");
    SavingsTable table;
    table.reference_codec = reference_codec;
    table.threshold = threshold;
    table.metric_name = curves.front().metric_name;

    std::map<std::pair<std::string, std::string>, const RateQualityCurve*> by_key;
    std::vector<std::string> codec_order;
    std::vector<std::string> clip_order;
    for (const auto& c : curves) {
        if (c.metric_name != table.metric_name)
            throw ConsistencyError("savings_table saw mixed metrics");
        if (!by_key.emplace(std::make_pair(c.codec_name, c.clip_name), &c).second)
            throw ConsistencyError("duplicate curve for codec " + c.codec_name + ", clip " +
                                   c.clip_name);
        if (std::find(codec_order.begin(), codec_order.end(), c.codec_name) == codec_order.end())
            codec_order.push_back(c.codec_name);
        if (std::find(clip_order.begin(), clip_order.end(), c.clip_name) == clip_order.end())
            clip_order.push_back(c.clip_name);
    }
    if (std::find(codec_order.begin(), codec_order.end(), reference_codec) == codec_order.end())
        throw ConsistencyError("reference codec " + reference_codec + " has no curves");

    // Clips where the reference attains the threshold; others are excluded.
    for (const auto& clip : clip_order) {
        auto it = by_key.find({reference_codec, clip});
        std::optional<double> ref_min;
        if (it != by_key.end()) ref_min = min_bitrate_at_quality(*it->second, threshold);
        if (!ref_min) {
            table.warnings.push_back("clip " + clip + " excluded: reference codec " +
                                     reference_codec + " does not reach " +
                                     std::to_string(threshold));
            continue;
        }
        table.clip_names.push_back(clip);
        table.reference_bitrates.push_back(*ref_min);
    }

    for (const auto& codec : codec_order) {
        if (codec == reference_codec) continue;
        SavingsRow row;
        row.codec_name = codec;
        std::vector<std::optional<double>> ratios;
        for (size_t ci = 0; ci < table.clip_names.size(); ++ci) {
            auto it = by_key.find({codec, table.clip_names[ci]});
            std::optional<double> cand_min;
            if (it != by_key.end()) cand_min = min_bitrate_at_quality(*it->second, threshold);
            if (!cand_min) {
                row.cells.emplace_back(std::nullopt);
                ratios.emplace_back(std::nullopt);
            } else {
                double ratio = savings_ratio(table.reference_bitrates[ci], *cand_min);
                row.cells.emplace_back(SavingsCell{*cand_min, ratio});
                ratios.emplace_back(ratio);
            }
        }
        row.average = average_available(ratios);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace vpcb

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vpcb/analysis.hpp"

namespace vpcb {

// Report emission: savings CSV, curve JSON records and SVG rate-quality
// plots (log10 bitrate on x). Output is byte-deterministic for equal inputs.

struct ReportCurve {
    RateQualityCurve curve;
    std::string mode = "direct";  // "direct" or a channel profile name
};

namespace detail {

inline std::string fmt_double(double v, const char* spec = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

inline const char* series_color(size_t i) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

inline std::string sanitize_filename(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

// One plot: every (codec, gop) series for a (mode, clip, metric) group.
inline std::string render_svg(const std::vector<const ReportCurve*>& series,
                              const std::string& clip, const std::string& metric) {
    constexpr int kW = 760, kH = 480;
    constexpr int kL = 70, kR = 180, kT = 40, kB = 50;
    const int plot_w = kW - kL - kR, plot_h = kH - kT - kB;

    double min_log = 1e300, max_log = -1e300, min_q = 1e300, max_q = -1e300;
    for (const auto* s : series)
        for (const auto& p : s->curve.points) {
            double lb = std::log10(p.bitrate_mbps);
            min_log = std::min(min_log, lb);
            max_log = std::max(max_log, lb);
            min_q = std::min(min_q, p.quality);
            max_q = std::max(max_q, p.quality);
        }
    if (max_log - min_log < 1e-9) {
        min_log -= 0.5;
        max_log += 0.5;
    }
    if (max_q - min_q < 1e-9) {
        min_q -= 1;
        max_q += 1;
    }
    auto sx = [&](double lb) { return kL + (lb - min_log) / (max_log - min_log) * plot_w; };
    auto sy = [&](double q) { return kT + (max_q - q) / (max_q - min_q) * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kW) +
           "\" height=\"" + std::to_string(kH) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(kL) + "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"15\">" + clip + " - " + metric + " vs bitrate</text>\n";

    // Axes and decade ticks.
    svg += "<line x1=\"" + std::to_string(kL) + "\" y1=\"" + std::to_string(kT + plot_h) +
           "\" x2=\"" + std::to_string(kL + plot_w) + "\" y2=\"" + std::to_string(kT + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + std::to_string(kL) + "\" y1=\"" + std::to_string(kT) + "\" x2=\"" +
           std::to_string(kL) + "\" y2=\"" + std::to_string(kT + plot_h) +
           "\" stroke=\"black\"/>\n";
    for (int d = static_cast<int>(std::floor(min_log)); d <= static_cast<int>(std::ceil(max_log));
         ++d) {
        if (d < min_log - 1e-9 || d > max_log + 1e-9) continue;
        double x = sx(d);
        svg += "<line x1=\"" + fmt_double(x, "%.1f") + "\" y1=\"" + std::to_string(kT) +
               "\" x2=\"" + fmt_double(x, "%.1f") + "\" y2=\"" + std::to_string(kT + plot_h) +
               "\" stroke=\"#dddddd\"/>\n";
        svg += "<text x=\"" + fmt_double(x, "%.1f") + "\" y=\"" + std::to_string(kT + plot_h + 18) +
               "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
               fmt_double(std::pow(10.0, d), "%g") + "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        double q = min_q + (max_q - min_q) * i / 4;
        double y = sy(q);
        svg += "<text x=\"" + std::to_string(kL - 8) + "\" y=\"" + fmt_double(y + 4, "%.1f") +
               "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" +
               fmt_double(q, "%.1f") + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(kL + plot_w / 2) + "\" y=\"" + std::to_string(kH - 12) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">bitrate (Mb/s, "
           "log scale)</text>\n";

    for (size_t i = 0; i < series.size(); ++i) {
        const auto& c = series[i]->curve;
        std::string pts;
        for (const auto& p : c.points) {
            if (!pts.empty()) pts += " ";
            pts += fmt_double(sx(std::log10(p.bitrate_mbps)), "%.2f") + "," +
                   fmt_double(sy(p.quality), "%.2f");
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(series_color(i)) +
               "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        int ly = kT + 16 + static_cast<int>(i) * 18;
        svg += "<line x1=\"" + std::to_string(kL + plot_w + 12) + "\" y1=\"" + std::to_string(ly - 4) +
               "\" x2=\"" + std::to_string(kL + plot_w + 34) + "\" y2=\"" + std::to_string(ly - 4) +
               "\" stroke=\"" + series_color(i) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + std::to_string(kL + plot_w + 40) + "\" y=\"" + std::to_string(ly) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + c.codec_name + "/" +
               c.gop_label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace detail

struct ReportFiles {
    std::filesystem::path csv;
    std::filesystem::path curves_json;
    std::vector<std::filesystem::path> svgs;
};

// Savings tables are built per (mode, metric, GOP): curves with gop "na"
// (GOP-free codecs) participate in every GOP table of their mode/metric.
inline ReportFiles emit_report(const std::vector<ReportCurve>& curves,
                               const std::string& reference_codec, double threshold,
                               const std::filesystem::path& out_dir) {
    if (curves.empty()) throw DimensionError("emit_report needs at least one curve");
    std::filesystem::create_directories(out_dir);
    ReportFiles files;

    // savings.csv
    std::string csv = "codec,clip,gop,metric,threshold,min_bitrate_mbps,savings_ratio\n";
    std::vector<std::pair<std::string, std::string>> groups;  // (mode, metric)
    for (const auto& rc : curves) {
        auto g = std::make_pair(rc.mode, rc.curve.metric_name);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    std::sort(groups.begin(), groups.end());
    for (const auto& [mode, metric] : groups) {
        std::vector<std::string> gop_labels;
        for (const auto& rc : curves) {
            if (rc.mode != mode || rc.curve.metric_name != metric) continue;
            if (rc.curve.gop_label == "na") continue;
            if (std::find(gop_labels.begin(), gop_labels.end(), rc.curve.gop_label) ==
                gop_labels.end())
                gop_labels.push_back(rc.curve.gop_label);
        }
        if (gop_labels.empty()) gop_labels.push_back("na");
        std::sort(gop_labels.begin(), gop_labels.end());
        for (const auto& gop : gop_labels) {
            std::vector<RateQualityCurve> selected;
            for (const auto& rc : curves)
                if (rc.mode == mode && rc.curve.metric_name == metric &&
                    (rc.curve.gop_label == gop || rc.curve.gop_label == "na"))
                    selected.push_back(rc.curve);
            bool has_ref = false;
            for (const auto& c : selected) has_ref |= c.codec_name == reference_codec;
            if (!has_ref) continue;
            SavingsTable table = savings_table(selected, reference_codec, threshold);
            for (size_t ci = 0; ci < table.clip_names.size(); ++ci)
                csv += reference_codec + "," + table.clip_names[ci] + "," + gop + "," + metric +
                       "," + detail::fmt_double(threshold, "%.2f") + "," +
                       detail::fmt_double(table.reference_bitrates[ci], "%.3f") + ",1.0000\n";
            for (const auto& row : table.rows) {
                for (size_t ci = 0; ci < table.clip_names.size(); ++ci) {
                    csv += row.codec_name + "," + table.clip_names[ci] + "," + gop + "," + metric +
                           "," + detail::fmt_double(threshold, "%.2f") + ",";
                    if (row.cells[ci])
                        csv += detail::fmt_double(row.cells[ci]->min_bitrate_mbps, "%.3f") + "," +
                               detail::fmt_double(row.cells[ci]->ratio, "%.4f") + "\n";
                    else
                        csv += "NA,NA\n";
                }
            }
        }
    }
    files.csv = out_dir / "savings.csv";
    detail::write_file(files.csv, csv);

    // curves.json
    nlohmann::json jcurves = nlohmann::json::array();
    std::vector<const ReportCurve*> ordered;
    for (const auto& rc : curves) ordered.push_back(&rc);
    std::sort(ordered.begin(), ordered.end(), [](const ReportCurve* a, const ReportCurve* b) {
        auto ka = std::tie(a->mode, a->curve.metric_name, a->curve.clip_name, a->curve.codec_name,
                           a->curve.gop_label);
        auto kb = std::tie(b->mode, b->curve.metric_name, b->curve.clip_name, b->curve.codec_name,
                           b->curve.gop_label);
        return ka < kb;
    });
    for (const auto* rc : ordered) {
        nlohmann::json jc;
        jc["mode"] = rc->mode;
        jc["codec"] = rc->curve.codec_name;
        jc["clip"] = rc->curve.clip_name;
        jc["gop"] = rc->curve.gop_label;
        jc["metric"] = rc->curve.metric_name;
        auto pts = nlohmann::json::array();
        for (const auto& p : rc->curve.points)
            pts.push_back({{"bitrate_mbps", p.bitrate_mbps}, {"quality", p.quality}});
        jc["points"] = pts;
        jcurves.push_back(jc);
    }
    files.curves_json = out_dir / "curves.json";
    detail::write_file(files.curves_json, jcurves.dump(2) + "\n");

    // One SVG per (mode, clip, metric), one polyline per (codec, gop).
    std::set<std::tuple<std::string, std::string, std::string>> plot_keys;
    for (const auto* rc : ordered)
        plot_keys.insert({rc->mode, rc->curve.clip_name, rc->curve.metric_name});
    for (const auto& [mode, clip, metric] : plot_keys) {
        std::vector<const ReportCurve*> series;
        for (const auto* rc : ordered)
            if (rc->mode == mode && rc->curve.clip_name == clip && rc->curve.metric_name == metric &&
                !rc->curve.points.empty())
                series.push_back(rc);
        if (series.empty()) continue;
        auto path = out_dir / detail::sanitize_filename("rq_" + clip + "_" + metric + "_" + mode +
                                                        ".svg");
        detail::write_file(path, detail::render_svg(series, clip, metric));
        files.svgs.push_back(path);
    }
    return files;
}

}  // namespace vpcb

#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpcb/channel.hpp"
#include "vpcb/harness.hpp"
#include "vpcb/metrics.hpp"
#include "vpcb/synthetic.hpp"

namespace vpcb {

// Experiment manifest (JSON). All paths are resolved relative to the manifest
// file's directory. See README for the full schema.

struct SyntheticSource {
    SyntheticKind kind = SyntheticKind::Gradient;
    VideoSpec spec;
};

struct ClipSource {
    std::string name;
    uint16_t clip_id = 0;
    std::optional<std::filesystem::path> path;       // Y4M file source
    std::optional<SyntheticSource> synthetic;        // generated source
};

struct LadderSpec {
    enum class Mode { Explicit, Jnd };

    Mode mode = Mode::Jnd;
    std::map<std::string, std::vector<int>> explicit_points;  // codec -> rate params
    double jnd_step = 6.0;
    double quality_floor = 82.0;
    int point_count = 5;
    std::string metric = "psnr";  // quality function for the JND search
};

struct MetricsSpec {
    bool native_psnr = true;
    std::vector<MetricRunner> runners;
};

struct ExperimentManifest {
    uint64_t seed = 0;
    std::filesystem::path base_dir;
    std::filesystem::path output_dir;
    double threshold = 90.0;
    std::string reference_codec;
    std::vector<ClipSource> clips;
    std::vector<CodecConfig> codecs;
    std::vector<GopMode> gop_modes;
    LadderSpec ladder;
    std::map<std::string, ChannelConfig> channels;
    std::vector<std::string> modes;  // "direct" and/or channel profile names
    MetricsSpec metrics;
    MarkerGeometry marker_geometry{};
    int workers = 1;
    std::string manifest_hash;

    const CodecConfig* find_codec(const std::string& name) const {
        for (const auto& c : codecs)
            if (c.codec_name == name) return &c;
        return nullptr;
    }

    const MetricRunner* find_runner(const std::string& name) const {
        for (const auto& r : metrics.runners)
            if (r.name == name) return &r;
        return nullptr;
    }
};

namespace detail {

inline GopMode parse_gop(const nlohmann::json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "all_intra" || s == "gop0") return GopMode::all_intra();
        if (s == "single_intra" || s == "gop-1") return GopMode::single_intra();
        throw ParseError("unknown gop mode \"" + s + "\"");
    }
    if (j.is_object()) {
        if (j.contains("frames")) return GopMode::fixed_frames(j["frames"].get<int64_t>());
        if (j.contains("seconds")) return GopMode::seconds(j["seconds"].get<double>());
    }
    throw ParseError("gop mode must be a string or {frames}/{seconds} object");
}

inline Rational parse_rational(const nlohmann::json& j, const char* what) {
    if (j.is_number_integer()) return Rational{j.get<int64_t>(), 1};
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        auto colon = s.find(':');
        if (colon != std::string::npos) {
            try {
                return Rational{std::stoll(s.substr(0, colon)), std::stoll(s.substr(colon + 1))};
            } catch (const std::exception&) {
            }
        }
    }
    throw ParseError(std::string(what) + " must be an integer or \"num:den\" string");
}

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
    if (s == "gradient") return SyntheticKind::Gradient;
    if (s == "moving_bar") return SyntheticKind::MovingBar;
    if (s == "noise") return SyntheticKind::Noise;
    if (s == "text_like") return SyntheticKind::TextLike;
    throw ParseError("unknown synthetic clip kind \"" + s + "\"");
}

inline ChannelConfig parse_channel(const nlohmann::json& j) {
    ChannelConfig cfg;
    if (j.contains("roi")) {
        const auto& r = j["roi"];
        cfg.roi = RectRoi{r.at("x").get<int>(), r.at("y").get<int>(), r.at("width").get<int>(),
                          r.at("height").get<int>()};
    }
    if (j.contains("resample")) {
        const auto& r = j["resample"];
        cfg.resample.kind = ResampleConfig::Kind::DisplayGrid;
        cfg.resample.scale = parse_rational(r.at("scale"), "resample scale");
        std::string rec = r.value("reconstruction", "bilinear");
        if (rec == "nearest")
            cfg.resample.reconstruction = ResampleConfig::Reconstruction::Nearest;
        else if (rec == "bilinear")
            cfg.resample.reconstruction = ResampleConfig::Reconstruction::Bilinear;
        else
            throw ParseError("unknown reconstruction \"" + rec + "\"");
    }
    if (j.contains("color")) {
        const auto& c = j["color"];
        if (c.contains("matrix")) {
            auto m = c["matrix"].get<std::vector<double>>();
            if (m.size() != 9) throw ParseError("color matrix must have 9 entries");
            std::copy(m.begin(), m.end(), cfg.color.matrix.begin());
        }
        if (c.contains("gamma")) {
            auto g = c["gamma"].get<std::vector<double>>();
            if (g.size() != 3) throw ParseError("color gamma must have 3 entries");
            std::copy(g.begin(), g.end(), cfg.color.gamma.begin());
        }
    }
    cfg.noise_sigma = j.value("noise_sigma", 0.0);
    if (j.contains("jitter")) {
        cfg.jitter.duplicate_prob = j["jitter"].value("duplicate_prob", 0.0);
        cfg.jitter.skip_prob = j["jitter"].value("skip_prob", 0.0);
    }
    cfg.validate();
    return cfg;
}

inline RateParamKind parse_rate_kind(const std::string& s) {
    if (s == "qp") return RateParamKind::Qp;
    if (s == "cq") return RateParamKind::Cq;
    if (s == "quality_level") return RateParamKind::QualityLevel;
    if (s == "fixed_mode") return RateParamKind::FixedMode;
    throw ParseError("unknown rate_param_kind \"" + s + "\"");
}

inline CodecConfig parse_codec(const nlohmann::json& j) {
    CodecConfig c;
    c.codec_name = j.at("name").get<std::string>();
    const auto& backend = j.at("backend");
    if (backend.is_string() && backend.get<std::string>() == "toy") {
        c.backend = BuiltinToy{};
        c.rate_min = toy::kMinQp;
        c.rate_max = toy::kMaxQp;
    } else if (backend.is_object()) {
        c.backend = ExternalBackend{backend.at("encode").get<std::string>(),
                                    backend.at("decode").get<std::string>()};
    } else {
        throw ParseError("codec backend must be \"toy\" or {encode, decode} templates");
    }
    c.rate_param_kind = parse_rate_kind(j.value("rate_param_kind", "qp"));
    if (j.contains("labels")) {
        c.rate_labels = j["labels"].get<std::vector<std::string>>();
        c.rate_min = 0;
        c.rate_max = static_cast<int>(c.rate_labels.size()) - 1;
    } else if (j.contains("range")) {
        auto r = j["range"].get<std::vector<int>>();
        if (r.size() != 2) throw ParseError("codec range must be [min, max]");
        c.rate_min = r[0];
        c.rate_max = r[1];
    }
    c.supports_10bit = j.value("supports_10bit", true);
    c.gop_free = j.value("gop_free", false);
    c.validate();
    return c;
}

}  // namespace detail

inline ExperimentManifest parse_manifest(const std::string& text,
                                         const std::filesystem::path& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }

    ExperimentManifest m;
    m.base_dir = base_dir;
    m.manifest_hash = fnv1a64_hex(text);
    try {
        m.seed = j.value("seed", 0ULL);
        m.output_dir = base_dir / j.value("output_dir", std::string("out"));
        m.threshold = j.value("threshold", 90.0);
        m.reference_codec = j.at("reference_codec").get<std::string>();
        m.workers = j.value("workers", 1);

        for (const auto& jc : j.at("clips")) {
            ClipSource cs;
            cs.name = jc.at("name").get<std::string>();
            cs.clip_id = jc.at("clip_id").get<uint16_t>();
            if (jc.contains("path")) {
                cs.path = base_dir / jc["path"].get<std::string>();
            } else if (jc.contains("synthetic")) {
                const auto& js = jc["synthetic"];
                SyntheticSource ss;
                ss.kind = detail::parse_synthetic_kind(js.at("kind").get<std::string>());
                ss.spec.width = js.at("width").get<int>();
                ss.spec.height = js.at("height").get<int>();
                ss.spec.bit_depth = js.value("bit_depth", 8);
                std::string chroma = js.value("chroma", "420");
                if (chroma == "420")
                    ss.spec.chroma = Chroma::C420;
                else if (chroma == "444")
                    ss.spec.chroma = Chroma::C444;
                else
                    throw ParseError("unknown chroma \"" + chroma + "\"");
                ss.spec.frame_rate =
                    js.contains("fps") ? detail::parse_rational(js["fps"], "fps") : Rational{30, 1};
                ss.spec.frame_count = js.at("frames").get<int64_t>();
                ss.spec.validate();
                cs.synthetic = ss;
            } else {
                throw ParseError("clip " + cs.name + " needs a path or a synthetic block");
            }
            m.clips.push_back(std::move(cs));
        }

        for (const auto& jc : j.at("codecs")) m.codecs.push_back(detail::parse_codec(jc));

        if (j.contains("gop_modes"))
            for (const auto& jg : j["gop_modes"]) m.gop_modes.push_back(detail::parse_gop(jg));
        if (m.gop_modes.empty()) m.gop_modes.push_back(GopMode::all_intra());

        if (j.contains("ladder")) {
            const auto& jl = j["ladder"];
            std::string mode = jl.value("mode", "jnd");
            if (mode == "explicit") {
                m.ladder.mode = LadderSpec::Mode::Explicit;
                for (const auto& [codec, pts] : jl.at("points").items())
                    m.ladder.explicit_points[codec] = pts.get<std::vector<int>>();
            } else if (mode == "jnd") {
                m.ladder.mode = LadderSpec::Mode::Jnd;
                m.ladder.jnd_step = jl.value("step", 6.0);
                m.ladder.quality_floor = jl.value("floor", 82.0);
                m.ladder.point_count = jl.value("points", 5);
                m.ladder.metric = jl.value("metric", "psnr");
            } else {
                throw ParseError("ladder mode must be \"explicit\" or \"jnd\"");
            }
        }

        if (j.contains("channels"))
            for (const auto& [name, jc] : j["channels"].items())
                m.channels[name] = detail::parse_channel(jc);

        if (j.contains("channel")) {
            if (j["channel"].is_string())
                m.modes.push_back(j["channel"].get<std::string>());
            else
                for (const auto& mode : j["channel"]) m.modes.push_back(mode.get<std::string>());
        }
        if (m.modes.empty()) m.modes.push_back("direct");

        if (j.contains("metrics")) {
            const auto& jm = j["metrics"];
            m.metrics.native_psnr = jm.value("psnr", true);
            if (jm.contains("runners"))
                for (const auto& jr : jm["runners"]) {
                    MetricRunner r;
                    r.name = jr.at("name").get<std::string>();
                    r.command_template = jr.at("command").get<std::string>();
                    if (jr.contains("range")) {
                        auto range = jr["range"].get<std::vector<double>>();
                        if (range.size() != 2) throw ParseError("runner range must be [min, max]");
                        r.score_min = range[0];
                        r.score_max = range[1];
                    }
                    m.metrics.runners.push_back(std::move(r));
                }
        }

        if (j.contains("markers")) {
            const auto& jk = j["markers"];
            m.marker_geometry = MarkerGeometry::from_marker_size(jk.value("size", 90),
                                                                 jk.value("inset", 2));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("manifest field error: ") + e.what());
    }

    // Cross-references.
    if (!m.find_codec(m.reference_codec))
        throw ParseError("reference codec \"" + m.reference_codec + "\" is not declared");
    std::map<uint16_t, std::string> ids;
    for (const auto& c : m.clips) {
        auto [it, fresh] = ids.emplace(c.clip_id, c.name);
        if (!fresh)
            throw ParseError("clip id " + std::to_string(c.clip_id) + " used by both " +
                             it->second + " and " + c.name);
    }
    for (const auto& mode : m.modes)
        if (mode != "direct" && !m.channels.count(mode))
            throw ParseError("channel profile \"" + mode + "\" is not declared");
    if (m.ladder.mode == LadderSpec::Mode::Jnd && m.ladder.metric != "psnr" &&
        !m.find_runner(m.ladder.metric))
        throw ParseError("ladder metric \"" + m.ladder.metric + "\" is not a declared runner");
    if (m.ladder.mode == LadderSpec::Mode::Explicit)
        for (const auto& [codec, pts] : m.ladder.explicit_points) {
            const CodecConfig* cc = m.find_codec(codec);
            if (!cc) throw ParseError("ladder lists unknown codec \"" + codec + "\"");
            for (int p : pts) cc->check_rate_param(p);
        }
    if (m.workers < 1) throw ParseError("workers must be >= 1");
    return m;
}

inline ExperimentManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str(), std::filesystem::absolute(path).parent_path());
}

}  // namespace vpcb

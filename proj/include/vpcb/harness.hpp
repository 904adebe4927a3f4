#pragma once

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "vpcb/frame.hpp"
#include "vpcb/gop.hpp"
#include "vpcb/toy_codec.hpp"
#include "vpcb/y4m.hpp"

namespace vpcb {

// Encoder backend driver: external commands declared as templates with
// {input} {output} {qp} {gop} placeholders, or the built-in toy codec.
// Encode timing is wall clock around the encode step only; stdout/stderr of
// external commands are persisted beside the encoded artifact.

struct CommandResult {
    int exit_code = -1;
    double wall_seconds = 0;
};

inline std::string expand_template(std::string tmpl,
                                   const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        std::string needle = "{" + key + "}";
        size_t pos = 0;
        while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
            tmpl.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return tmpl;
}

// Runs `command` via /bin/sh -c with stdout/stderr redirected to files.
inline CommandResult run_command(const std::string& command,
                                 const std::filesystem::path& stdout_path,
                                 const std::filesystem::path& stderr_path) {
    auto t0 = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) throw ProcessError("fork failed");
    if (pid == 0) {
        int out_fd = ::open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int err_fd = ::open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out_fd >= 0) ::dup2(out_fd, 1);
        if (err_fd >= 0) ::dup2(err_fd, 2);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    int status = 0;
    if (::waitpid(pid, &status, 0) < 0) throw ProcessError("waitpid failed");
    auto t1 = std::chrono::steady_clock::now();
    CommandResult r;
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (WIFEXITED(status))
        r.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        r.exit_code = 128 + WTERMSIG(status);
    return r;
}

inline std::string read_text_file(const std::filesystem::path& p, size_t max_bytes = 4096) {
    std::ifstream in(p, std::ios::binary);
    std::string s;
    char buf[512];
    while (in && s.size() < max_bytes) {
        in.read(buf, sizeof(buf));
        s.append(buf, static_cast<size_t>(in.gcount()));
    }
    return s;
}

enum class RateParamKind { Qp, Cq, QualityLevel, FixedMode };

inline const char* to_string(RateParamKind k) {
    switch (k) {
        case RateParamKind::Qp: return "qp";
        case RateParamKind::Cq: return "cq";
        case RateParamKind::QualityLevel: return "quality_level";
        case RateParamKind::FixedMode: return "fixed_mode";
    }
    return "?";
}

struct BuiltinToy {};

struct ExternalBackend {
    std::string encode_template;  // {input} {output} {qp} {gop}
    std::string decode_template;  // {input} {output}
};

struct CodecConfig {
    std::string codec_name;
    std::variant<BuiltinToy, ExternalBackend> backend = BuiltinToy{};
    RateParamKind rate_param_kind = RateParamKind::Qp;
    int rate_min = 0;
    int rate_max = 0;
    std::vector<std::string> rate_labels;  // enumerated params; range is [0, size)
    std::optional<GopMode> gop;            // GOP policy for this encode run
    bool gop_free = false;                 // codec has no GOP concept (gop stays unset)
    bool supports_10bit = true;

    bool is_toy() const { return std::holds_alternative<BuiltinToy>(backend); }

    void validate() const {
        if (codec_name.empty()) throw ConsistencyError("codec name must not be empty");
        if (gop_free && gop.has_value())
            throw ConsistencyError(codec_name + " is GOP-free but has a GOP mode set");
        if (!rate_labels.empty()) {
            if (rate_min != 0 || rate_max != static_cast<int>(rate_labels.size()) - 1)
                throw ConsistencyError("enumerated rate range must span the label list");
        } else if (rate_min > rate_max) {
            throw RangeError("empty rate parameter range for " + codec_name);
        }
    }

    void check_rate_param(int v) const {
        if (v < rate_min || v > rate_max)
            throw RangeError("rate param " + std::to_string(v) + " outside [" +
                             std::to_string(rate_min) + ", " + std::to_string(rate_max) + "] for " +
                             codec_name);
    }

    std::string rate_label(int v) const {
        if (rate_labels.empty()) return std::to_string(v);
        check_rate_param(v);
        return rate_labels[static_cast<size_t>(v)];
    }

    void check_input(const VideoSpec& spec) const {
        if (spec.bit_depth > 8 && !supports_10bit)
            throw FormatError(codec_name + " does not support " + std::to_string(spec.bit_depth) +
                              "-bit input");
    }

    std::string gop_label() const { return gop ? gop->label() : "na"; }
};

struct LadderPoint {
    std::string codec_name;
    std::string source_clip;
    std::optional<GopMode> gop;
    int rate_param = 0;
    std::string rate_label;
    std::filesystem::path encoded_path;
    int64_t encoded_bytes = 0;
    double bitrate_mbps = 0;
    double encode_seconds = 0;
    double encode_fps = 0;
    ClipDescriptor decoded_clip;  // role DegDec
};

inline double bitrate_mbps_for(int64_t encoded_bytes, const VideoSpec& spec) {
    double duration = spec.duration_seconds();
    if (duration <= 0) throw RangeError("cannot compute bitrate of a zero-duration clip");
    return static_cast<double>(encoded_bytes) * 8.0 / duration / 1e6;
}

namespace detail {

// Serializes dedicated timing runs against ordinary concurrent encodes.
inline std::shared_mutex& timing_mutex() {
    static std::shared_mutex m;
    return m;
}

struct EncodeResult {
    std::filesystem::path encoded_path;
    int64_t encoded_bytes = 0;
    double encode_seconds = 0;
    std::optional<Y4mClip> decoded;  // set when with_decode
    std::filesystem::path decoded_path;
};

inline EncodeResult encode_core(const ClipDescriptor& clip, const CodecConfig& config,
                                int rate_param, const std::filesystem::path& out_dir,
                                bool with_decode) {
    config.validate();
    config.check_rate_param(rate_param);

    Y4mClip input = read_y4m_file(clip.storage_path);
    config.check_input(input.spec);
    if (input.frames.empty()) throw DimensionError("cannot encode a zero-length clip");

    std::filesystem::create_directories(out_dir);
    std::string stem = clip.name + "." + config.codec_name + "." + config.gop_label() + "." +
                       config.rate_label(rate_param);
    EncodeResult res;
    res.encoded_path = out_dir / (stem + ".bin");
    res.decoded_path = out_dir / (stem + ".dec.y4m");

    if (config.is_toy()) {
        GopMode gop = config.gop.value_or(GopMode::all_intra());
        auto t0 = std::chrono::steady_clock::now();
        std::vector<uint8_t> bytes =
            toy_encode(input.frames, rate_param, gop, input.spec.frame_rate);
        auto t1 = std::chrono::steady_clock::now();
        res.encode_seconds = std::chrono::duration<double>(t1 - t0).count();
        std::ofstream out(res.encoded_path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed: " + res.encoded_path.string());
        out.close();
        res.encoded_bytes = static_cast<int64_t>(bytes.size());
        if (with_decode) {
            ToyDecoded dec = toy_decode(bytes);
            write_y4m_file(res.decoded_path, dec.spec, dec.frames);
            res.decoded = Y4mClip{dec.spec, std::move(dec.frames)};
        }
    } else {
        const auto& ext = std::get<ExternalBackend>(config.backend);
        GopMode gop = config.gop.value_or(GopMode::all_intra());
        std::map<std::string, std::string> vars{
            {"input", clip.storage_path.string()},
            {"output", res.encoded_path.string()},
            {"qp", config.rate_label(rate_param)},
            {"gop", std::to_string(gop.template_value(input.spec.frame_rate))}};
        std::string cmd = expand_template(ext.encode_template, vars);
        CommandResult cr = run_command(cmd, out_dir / (stem + ".enc.stdout.log"),
                                       out_dir / (stem + ".enc.stderr.log"));
        if (cr.exit_code != 0)
            throw ProcessError("encode command failed (exit " + std::to_string(cr.exit_code) +
                               "): " + cmd + "\n" +
                               read_text_file(out_dir / (stem + ".enc.stderr.log")));
        res.encode_seconds = cr.wall_seconds;
        std::error_code ec;
        auto sz = std::filesystem::file_size(res.encoded_path, ec);
        if (ec) throw ProcessError("encode command produced no output: " + cmd);
        res.encoded_bytes = static_cast<int64_t>(sz);
        if (with_decode) {
            std::map<std::string, std::string> dvars{{"input", res.encoded_path.string()},
                                                     {"output", res.decoded_path.string()}};
            std::string dcmd = expand_template(ext.decode_template, dvars);
            CommandResult dr = run_command(dcmd, out_dir / (stem + ".dec.stdout.log"),
                                           out_dir / (stem + ".dec.stderr.log"));
            if (dr.exit_code != 0)
                throw ProcessError("decode command failed (exit " + std::to_string(dr.exit_code) +
                                   "): " + dcmd + "\n" +
                                   read_text_file(out_dir / (stem + ".dec.stderr.log")));
            res.decoded = read_y4m_file(res.decoded_path);
        }
    }
    return res;
}

}  // namespace detail

// One ladder-point encode: run the backend, record size and wall time, decode
// back to Y4M as the DegDec clip.
inline LadderPoint encode(const ClipDescriptor& clip, const CodecConfig& config, int rate_param,
                          const std::filesystem::path& out_dir) {
    std::shared_lock lock(detail::timing_mutex());
    detail::EncodeResult res = detail::encode_core(clip, config, rate_param, out_dir, true);

    LadderPoint pt;
    pt.codec_name = config.codec_name;
    pt.source_clip = clip.name;
    pt.gop = config.gop;
    pt.rate_param = rate_param;
    pt.rate_label = config.rate_label(rate_param);
    pt.encoded_path = res.encoded_path;
    pt.encoded_bytes = res.encoded_bytes;
    pt.bitrate_mbps = bitrate_mbps_for(res.encoded_bytes, clip.spec);
    pt.encode_seconds = res.encode_seconds;
    double secs = std::max(res.encode_seconds, 1e-9);
    pt.encode_fps = static_cast<double>(clip.spec.frame_count) / secs;
    std::string dec_name = clip.name + "." + config.codec_name + "." + config.gop_label() + "." +
                           pt.rate_label;
    ClipDescriptor staged = clip;
    if (staged.role == ClipRole::Ref)
        staged = staged.derived(ClipRole::Deg, dec_name, res.encoded_path);
    pt.decoded_clip = staged.derived(ClipRole::DegDec, dec_name, res.decoded_path);
    if (res.decoded) pt.decoded_clip.spec = res.decoded->spec;
    return pt;
}

// Mean encode throughput over repeated runs. Runs exclusively: concurrent
// encodes would skew the wall clock.
inline double measure_encode_fps(const ClipDescriptor& clip, const CodecConfig& config,
                                 int rate_param, const std::filesystem::path& out_dir,
                                 int repetitions, bool discard_warmup = false) {
    if (repetitions < 1) throw RangeError("repetitions must be >= 1");
    if (clip.spec.frame_count <= 0) throw RangeError("cannot time a zero-length clip");
    if (discard_warmup && repetitions < 2)
        throw RangeError("warm-up discard requires at least 2 repetitions");

    std::unique_lock lock(detail::timing_mutex());
    std::vector<double> fps;
    for (int i = 0; i < repetitions; ++i) {
        detail::EncodeResult res = detail::encode_core(clip, config, rate_param, out_dir, false);
        double secs = std::max(res.encode_seconds, 1e-9);
        fps.push_back(static_cast<double>(clip.spec.frame_count) / secs);
    }
    size_t first = discard_warmup ? 1 : 0;
    double sum = 0;
    for (size_t i = first; i < fps.size(); ++i) sum += fps[i];
    return sum / static_cast<double>(fps.size() - first);
}

}  // namespace vpcb

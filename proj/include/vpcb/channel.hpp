#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "vpcb/convert.hpp"
#include "vpcb/frame.hpp"

namespace vpcb {

// Simulated LED-wall display + camera capture chain. Stage order is fixed:
// crop -> resample -> color -> noise -> jitter, mirroring the physical chain
// (wall geometry, panel/camera optics and color, sensor noise, sync).
// Identity configuration is a bit-exact passthrough.

struct RectRoi {
    int x = 0, y = 0, width = 0, height = 0;
};

struct ResampleConfig {
    enum class Kind { None, DisplayGrid };
    enum class Reconstruction { Nearest, Bilinear };

    Kind kind = Kind::None;
    Rational scale{1, 1};  // display pixels per source pixel
    Reconstruction reconstruction = Reconstruction::Bilinear;
};

struct ColorTransform {
    // Row-major 3x3 applied to normalized (Y, Cb, Cr), then per-channel gamma.
    std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> gamma{1, 1, 1};

    bool is_identity() const {
        static constexpr std::array<double, 9> kI{1, 0, 0, 0, 1, 0, 0, 0, 1};
        return matrix == kI && gamma == std::array<double, 3>{1, 1, 1};
    }
};

struct JitterConfig {
    double duplicate_prob = 0;
    double skip_prob = 0;
};

struct ChannelConfig {
    std::optional<RectRoi> roi;  // zoom-mode crop
    ResampleConfig resample;
    ColorTransform color;
    double noise_sigma = 0;  // additive Gaussian, source sample units
    JitterConfig jitter;
    uint64_t seed = 0;

    void validate() const {
        if (jitter.duplicate_prob < 0 || jitter.skip_prob < 0 ||
            jitter.duplicate_prob + jitter.skip_prob >= 1.0)
            throw RangeError("jitter probabilities must be >= 0 and sum below 1");
        if (noise_sigma < 0) throw RangeError("noise sigma must be >= 0");
    }

    ChannelConfig with_seed(uint64_t s) const {
        ChannelConfig c = *this;
        c.seed = s;
        return c;
    }
};

struct ChannelOutput {
    std::vector<FrameBuffer> frames;
    std::vector<size_t> source_indices;  // input index each output frame came from
};

// sigma that makes additive Gaussian noise land at target_psnr on clamp-free
// content: sigma = (2^bit_depth - 1) * 10^(-target_psnr / 20).
inline double calibrate_noise_for_floor(double target_psnr_db, int bit_depth) {
    if (target_psnr_db <= 0) throw RangeError("target PSNR must be positive");
    double peak = static_cast<double>((1u << bit_depth) - 1);
    return peak * std::pow(10.0, -target_psnr_db / 20.0);
}

namespace detail {

inline void crop_roi(FrameBuffer& f, const RectRoi& roi) {
    const FrameFormat& fmt = f.fmt;
    if (roi.width <= 0 || roi.height <= 0 || roi.x < 0 || roi.y < 0 ||
        roi.x + roi.width > fmt.width || roi.y + roi.height > fmt.height)
        throw GeometryError("roi outside frame bounds");
    int sub = fmt.chroma == Chroma::C420 ? 2 : 1;
    if ((roi.x % sub) || (roi.y % sub) || (roi.width % sub) || (roi.height % sub))
        throw GeometryError("roi must be aligned to the chroma grid");

    FrameFormat out_fmt{roi.width, roi.height, fmt.bit_depth, fmt.chroma};
    FrameBuffer out(out_fmt);
    for (int y = 0; y < roi.height; ++y)
        for (int x = 0; x < roi.width; ++x)
            out.y[static_cast<size_t>(y) * roi.width + x] =
                f.y[static_cast<size_t>(roi.y + y) * fmt.width + (roi.x + x)];
    int cw = fmt.chroma_width();
    int ocw = out_fmt.chroma_width(), och = out_fmt.chroma_height();
    int cx0 = roi.x / sub, cy0 = roi.y / sub;
    for (int y = 0; y < och; ++y)
        for (int x = 0; x < ocw; ++x) {
            out.cb[static_cast<size_t>(y) * ocw + x] =
                f.cb[static_cast<size_t>(cy0 + y) * cw + (cx0 + x)];
            out.cr[static_cast<size_t>(y) * ocw + x] =
                f.cr[static_cast<size_t>(cy0 + y) * cw + (cx0 + x)];
        }
    f = std::move(out);
}

// Point-sample down to the display grid, then reconstruct back to the source
// grid. The round trip through the coarser grid is the aliasing source.
inline std::vector<uint16_t> resample_plane(const std::vector<uint16_t>& in, int w, int h,
                                            const ResampleConfig& rs) {
    int dw = std::max<int64_t>(1, (static_cast<int64_t>(w) * rs.scale.num + rs.scale.den / 2) /
                                      rs.scale.den);
    int dh = std::max<int64_t>(1, (static_cast<int64_t>(h) * rs.scale.num + rs.scale.den / 2) /
                                      rs.scale.den);
    std::vector<uint16_t> display(static_cast<size_t>(dw) * dh);
    for (int y = 0; y < dh; ++y) {
        int sy = std::min(h - 1, static_cast<int>((y + 0.5) * h / dh));
        for (int x = 0; x < dw; ++x) {
            int sx = std::min(w - 1, static_cast<int>((x + 0.5) * w / dw));
            display[static_cast<size_t>(y) * dw + x] = in[static_cast<size_t>(sy) * w + sx];
        }
    }
    std::vector<uint16_t> out(static_cast<size_t>(w) * h);
    if (rs.reconstruction == ResampleConfig::Reconstruction::Nearest) {
        for (int y = 0; y < h; ++y) {
            int dy = std::min(dh - 1, static_cast<int>((y + 0.5) * dh / h));
            for (int x = 0; x < w; ++x) {
                int dx = std::min(dw - 1, static_cast<int>((x + 0.5) * dw / w));
                out[static_cast<size_t>(y) * w + x] = display[static_cast<size_t>(dy) * dw + dx];
            }
        }
    } else {
        for (int y = 0; y < h; ++y) {
            double fy = (y + 0.5) * dh / h - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double wy = fy - y0;
            int y1 = std::min(dh - 1, std::max(0, y0 + 1));
            y0 = std::min(dh - 1, std::max(0, y0));
            for (int x = 0; x < w; ++x) {
                double fx = (x + 0.5) * dw / w - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double wx = fx - x0;
                int x1 = std::min(dw - 1, std::max(0, x0 + 1));
                x0 = std::min(dw - 1, std::max(0, x0));
                double v00 = display[static_cast<size_t>(y0) * dw + x0];
                double v01 = display[static_cast<size_t>(y0) * dw + x1];
                double v10 = display[static_cast<size_t>(y1) * dw + x0];
                double v11 = display[static_cast<size_t>(y1) * dw + x1];
                double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
                out[static_cast<size_t>(y) * w + x] = static_cast<uint16_t>(std::lround(v));
            }
        }
    }
    return out;
}

inline void apply_color(FrameBuffer& f, const ColorTransform& ct) {
    const Chroma original = f.fmt.chroma;
    if (original == Chroma::C420) f = convert_format(f, Chroma::C444, f.fmt.bit_depth);
    const double maxv = f.fmt.max_value();
    auto clamp01 = [](double v) { return v < 0 ? 0.0 : (v > 1 ? 1.0 : v); };
    for (size_t i = 0; i < f.y.size(); ++i) {
        double in[3] = {f.y[i] / maxv, f.cb[i] / maxv, f.cr[i] / maxv};
        double out[3];
        for (int r = 0; r < 3; ++r) {
            double v = ct.matrix[static_cast<size_t>(3 * r)] * in[0] +
                       ct.matrix[static_cast<size_t>(3 * r + 1)] * in[1] +
                       ct.matrix[static_cast<size_t>(3 * r + 2)] * in[2];
            v = clamp01(v);
            out[r] = std::pow(v, ct.gamma[static_cast<size_t>(r)]);
        }
        f.y[i] = static_cast<uint16_t>(std::lround(out[0] * maxv));
        f.cb[i] = static_cast<uint16_t>(std::lround(out[1] * maxv));
        f.cr[i] = static_cast<uint16_t>(std::lround(out[2] * maxv));
    }
    if (original == Chroma::C420) f = convert_format(f, Chroma::C420, f.fmt.bit_depth);
}

inline void add_noise(std::vector<uint16_t>& plane, double sigma, uint16_t maxv, uint64_t seed) {
    RandomStream rng(seed);
    for (auto& s : plane) {
        double v = s + sigma * rng.next_gaussian();
        long r = std::lround(v);
        s = static_cast<uint16_t>(r < 0 ? 0 : (r > maxv ? maxv : r));
    }
}

}  // namespace detail

inline ChannelOutput apply_channel(const std::vector<FrameBuffer>& frames,
                                   const ChannelConfig& cfg) {
    cfg.validate();
    if (frames.empty()) throw DimensionError("apply_channel requires a non-empty clip");
    for (const auto& f : frames)
        if (f.fmt != frames.front().fmt)
            throw DimensionError("apply_channel requires a consistent frame format");

    std::vector<FrameBuffer> processed;
    processed.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        FrameBuffer f = frames[i];
        if (cfg.roi) detail::crop_roi(f, *cfg.roi);
        if (cfg.resample.kind == ResampleConfig::Kind::DisplayGrid) {
            f.y = detail::resample_plane(f.y, f.fmt.width, f.fmt.height, cfg.resample);
            f.cb = detail::resample_plane(f.cb, f.fmt.chroma_width(), f.fmt.chroma_height(),
                                          cfg.resample);
            f.cr = detail::resample_plane(f.cr, f.fmt.chroma_width(), f.fmt.chroma_height(),
                                          cfg.resample);
        }
        if (!cfg.color.is_identity()) detail::apply_color(f, cfg.color);
        if (cfg.noise_sigma > 0) {
            uint16_t maxv = f.fmt.max_value();
            detail::add_noise(f.y, cfg.noise_sigma, maxv, mix_seed(cfg.seed, 0xa015e0, i, 0));
            detail::add_noise(f.cb, cfg.noise_sigma, maxv, mix_seed(cfg.seed, 0xa015e0, i, 1));
            detail::add_noise(f.cr, cfg.noise_sigma, maxv, mix_seed(cfg.seed, 0xa015e0, i, 2));
        }
        processed.push_back(std::move(f));
    }

    ChannelOutput out;
    if (cfg.jitter.duplicate_prob == 0 && cfg.jitter.skip_prob == 0) {
        out.frames = std::move(processed);
        out.source_indices.resize(out.frames.size());
        for (size_t i = 0; i < out.source_indices.size(); ++i) out.source_indices[i] = i;
        return out;
    }
    RandomStream jrng(mix_seed(cfg.seed, 0x717fe2));
    for (size_t i = 0; i < processed.size(); ++i) {
        double u_skip = jrng.next_unit();
        double u_dup = jrng.next_unit();
        if (u_skip < cfg.jitter.skip_prob) continue;
        out.frames.push_back(processed[i]);
        out.source_indices.push_back(i);
        if (u_dup < cfg.jitter.duplicate_prob) {
            out.frames.push_back(processed[i]);
            out.source_indices.push_back(i);
        }
    }
    return out;
}

}  // namespace vpcb

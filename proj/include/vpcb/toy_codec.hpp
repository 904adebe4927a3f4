#pragma once

#include <array>
#include <cstring>
#include <vector>

#include "vpcb/frame.hpp"
#include "vpcb/gop.hpp"

namespace vpcb {

// Hermetic block codec so the whole pipeline runs without external encoders.
//
// Per plane: 8x8 integer wavelet-packet transform built from lifting steps
// (exactly invertible, coefficients stay at sample scale), closed-loop DC
// prediction across blocks, uniform quantization with step qp+1, zigzag scan,
// zero-run/varint packing. Intra frames code mid-level-centered samples;
// delta frames code the difference to the previous *reconstructed* frame
// (closed loop, no drift). qp 0 is lossless. Planes with dimensions not
// divisible by 8 are edge-padded for coding and cropped on output.

namespace toy {

constexpr int kMinQp = 0;
constexpr int kMaxQp = 63;
constexpr char kMagic[4] = {'T', 'Y', 'C', '1'};

constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

// Pairwise S-transform lifting step: average/difference, exact inverse.
inline void lift_fwd(int32_t& a, int32_t& b) {
    int32_t s = (a + b) >> 1;
    int32_t d = a - b;
    a = s;
    b = d;
}

inline void lift_inv(int32_t& a, int32_t& b) {
    int32_t s = a, d = b;
    int32_t x = s + ((d + 1) >> 1);
    a = x;
    b = x - d;
}

// Three lifting levels = an 8-point Walsh-Hadamard-like packet with unit-ish
// gain; index 0 carries the block average.
inline void fwd8(int32_t* v, size_t stride) {
    int32_t buf[8];
    for (int lvl = 0; lvl < 3; ++lvl) {
        for (int i = 0; i < 8; i += 2 << lvl)
            for (int j = 0; j < (1 << lvl); ++j) {
                int32_t a = v[static_cast<size_t>(i + j) * stride];
                int32_t b = v[static_cast<size_t>(i + j + (1 << lvl)) * stride];
                lift_fwd(a, b);
                buf[i + j] = a;
                buf[i + j + (1 << lvl)] = b;
            }
        for (int i = 0; i < 8; ++i) v[static_cast<size_t>(i) * stride] = buf[i];
    }
}

inline void inv8(int32_t* v, size_t stride) {
    int32_t buf[8];
    for (int lvl = 2; lvl >= 0; --lvl) {
        for (int i = 0; i < 8; i += 2 << lvl)
            for (int j = 0; j < (1 << lvl); ++j) {
                int32_t a = v[static_cast<size_t>(i + j) * stride];
                int32_t b = v[static_cast<size_t>(i + j + (1 << lvl)) * stride];
                lift_inv(a, b);
                buf[i + j] = a;
                buf[i + j + (1 << lvl)] = b;
            }
        for (int i = 0; i < 8; ++i) v[static_cast<size_t>(i) * stride] = buf[i];
    }
}

inline void transform8x8(int32_t* block) {
    for (int r = 0; r < 8; ++r) fwd8(block + 8 * r, 1);
    for (int c = 0; c < 8; ++c) fwd8(block + c, 8);
}

inline void inverse8x8(int32_t* block) {
    for (int c = 0; c < 8; ++c) inv8(block + c, 8);
    for (int r = 0; r < 8; ++r) inv8(block + 8 * r, 1);
}

// Nearest multiple of step, halves toward zero. Step 1 is the identity.
inline int32_t quantize(int32_t v, int32_t step) {
    if (v >= 0) return (v + (step - 1) / 2) / step;
    return -((-v + (step - 1) / 2) / step);
}

// Per-coefficient quantizer step: the base step scaled by a weight chosen by
// block position and coefficient index. Spreading the steps keeps repeated
// synthetic patterns from resonating with one step (a resonance makes
// quality oscillate instead of decaying as qp grows). Every weight maps base
// step 1 to 1, so qp 0 stays lossless; each step is non-decreasing in the
// base step, so rate stays monotone.
inline int32_t coeff_step(int32_t base_step, int block_x, int block_y, int index) {
    static constexpr int kPercent[16] = {100, 81, 119, 93, 107, 87, 113, 79,
                                         121, 97, 103, 89, 111, 83, 117, 101};
    int k = (block_x * 5 + block_y * 11 + index * 3) & 15;
    int32_t step = (base_step * kPercent[k] + 50) / 100;
    return step < 1 ? 1 : step;
}

struct ByteWriter {
    std::vector<uint8_t> bytes;

    void u8(uint8_t v) { bytes.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
    void svarint(int32_t v) {
        uint32_t u = (static_cast<uint32_t>(v) << 1) ^ static_cast<uint32_t>(v >> 31);
        while (u >= 0x80) {
            bytes.push_back(static_cast<uint8_t>(u) | 0x80);
            u >>= 7;
        }
        bytes.push_back(static_cast<uint8_t>(u));
    }
};

struct ByteReader {
    const uint8_t* data;
    size_t size;
    size_t pos = 0;

    uint8_t u8() {
        if (pos >= size) throw ParseError("toy stream truncated");
        return data[pos++];
    }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
        return v;
    }
    int32_t svarint() {
        uint32_t u = 0;
        int shift = 0;
        while (true) {
            uint8_t b = u8();
            u |= static_cast<uint32_t>(b & 0x7f) << shift;
            if (!(b & 0x80)) break;
            shift += 7;
            if (shift > 28) throw ParseError("toy stream varint overflow");
        }
        return static_cast<int32_t>((u >> 1) ^ (~(u & 1) + 1));
    }
};

// Zero-run / value pairs in zigzag order, 0xFF terminates the block.
inline void pack_block(ByteWriter& w, const int32_t* coeffs) {
    int run = 0;
    for (int i = 0; i < 64; ++i) {
        int32_t v = coeffs[kZigzag[static_cast<size_t>(i)]];
        if (v == 0) {
            ++run;
            continue;
        }
        w.u8(static_cast<uint8_t>(run));
        w.svarint(v);
        run = 0;
    }
    w.u8(0xff);
}

inline void unpack_block(ByteReader& r, int32_t* coeffs) {
    std::memset(coeffs, 0, 64 * sizeof(int32_t));
    int pos = 0;
    while (true) {
        uint8_t run = r.u8();
        if (run == 0xff) break;
        pos += run;
        if (pos >= 64) throw ParseError("toy stream block overrun");
        coeffs[kZigzag[static_cast<size_t>(pos)]] = r.svarint();
        ++pos;
    }
}

// Edge-replicated copy into a width/height-padded int32 buffer.
struct PaddedPlane {
    int w = 0, h = 0;        // source dims
    int pw = 0, ph = 0;      // padded dims (multiples of 8)
    std::vector<int32_t> v;  // pw * ph

    static PaddedPlane from(const std::vector<uint16_t>& src, int w, int h) {
        PaddedPlane p = zeros(w, h);
        for (int y = 0; y < p.ph; ++y) {
            int sy = std::min(y, h - 1);
            for (int x = 0; x < p.pw; ++x) {
                int sx = std::min(x, w - 1);
                p.v[static_cast<size_t>(y) * p.pw + x] = src[static_cast<size_t>(sy) * w + sx];
            }
        }
        return p;
    }

    static PaddedPlane zeros(int w, int h) {
        PaddedPlane p;
        p.w = w;
        p.h = h;
        p.pw = (w + 7) / 8 * 8;
        p.ph = (h + 7) / 8 * 8;
        p.v.assign(static_cast<size_t>(p.pw) * p.ph, 0);
        return p;
    }

    void crop_to(std::vector<uint16_t>& dst) const {
        dst.resize(static_cast<size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dst[static_cast<size_t>(y) * w + x] =
                    static_cast<uint16_t>(v[static_cast<size_t>(y) * pw + x]);
    }
};

// Shared by encoder and decoder. On entry block[0] holds the DPCM-coded DC
// delta; the rest are quantized coefficients. Dequantizes, inverse
// transforms, adds the pixel prediction, clamps. Returns the absolute DC for
// the DPCM chain. The DC rides at full precision: a coherent flat-region DC
// error would otherwise dominate the clip MSE and oscillate with the step.
inline int32_t reconstruct_block(int32_t* block, const PaddedPlane* pred, PaddedPlane& recon,
                                 int bx, int by, int32_t step, int32_t mid, int32_t maxv,
                                 int32_t prev_dc) {
    int32_t dc = prev_dc + block[0];
    for (int i = 1; i < 64; ++i) block[i] *= coeff_step(step, bx / 8, by / 8, i);
    block[0] = dc;
    inverse8x8(block);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            size_t dst = static_cast<size_t>(by + y) * recon.pw + (bx + x);
            int32_t base = pred ? pred->v[dst] : mid;
            int32_t v = block[8 * y + x] + base;
            recon.v[dst] = v < 0 ? 0 : (v > maxv ? maxv : v);
        }
    return dc;
}

// Transform + quantize one block against the given prediction base.
// block[0] carries the full-precision DC, DPCM-coded against prev_dc.
inline void prepare_block(int32_t* block, const PaddedPlane& cur, const PaddedPlane* pred,
                          int bx, int by, int32_t step, int32_t mid, int32_t prev_dc) {
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            size_t src = static_cast<size_t>(by + y) * cur.pw + (bx + x);
            int32_t base = pred ? pred->v[src] : mid;
            block[8 * y + x] = cur.v[src] - base;
        }
    transform8x8(block);
    for (int i = 1; i < 64; ++i)
        block[i] = quantize(block[i], coeff_step(step, bx / 8, by / 8, i));
    block[0] -= prev_dc;
}

// Codes one plane and fills recon with the decoder-identical reconstruction.
//
// Intra planes predict every block from the mid level. Delta planes carry a
// leading bitmap with one mode bit per block (1 = intra): each block codes
// whichever of the intra and previous-frame predictions packs smaller, so a
// delta frame never costs more than its intra coding plus the bitmap. The DC
// coefficient rides at full precision, DPCM-coded across blocks.
inline void code_plane(ByteWriter& w, const PaddedPlane& cur, const PaddedPlane* pred,
                       PaddedPlane& recon, int32_t step, int32_t mid, int32_t maxv) {
    recon = PaddedPlane::zeros(cur.w, cur.h);
    const int blocks_x = cur.pw / 8, blocks_y = cur.ph / 8;
    std::vector<uint8_t> bitmap(pred ? (static_cast<size_t>(blocks_x) * blocks_y + 7) / 8 : 0, 0);
    ByteWriter blocks;
    int32_t block[64];
    int32_t prev_dc = 0;
    size_t block_index = 0;
    for (int by = 0; by < cur.ph; by += 8) {
        for (int bx = 0; bx < cur.pw; bx += 8, ++block_index) {
            bool use_intra = pred == nullptr;
            if (pred) {
                int32_t inter[64], intra[64];
                prepare_block(inter, cur, pred, bx, by, step, mid, prev_dc);
                prepare_block(intra, cur, nullptr, bx, by, step, mid, prev_dc);
                ByteWriter winter, wintra;
                pack_block(winter, inter);
                pack_block(wintra, intra);
                use_intra = wintra.bytes.size() < winter.bytes.size();
                if (use_intra) {
                    bitmap[block_index / 8] |= static_cast<uint8_t>(1u << (block_index % 8));
                    blocks.bytes.insert(blocks.bytes.end(), wintra.bytes.begin(),
                                        wintra.bytes.end());
                    std::memcpy(block, intra, sizeof(intra));
                } else {
                    blocks.bytes.insert(blocks.bytes.end(), winter.bytes.begin(),
                                        winter.bytes.end());
                    std::memcpy(block, inter, sizeof(inter));
                }
            } else {
                prepare_block(block, cur, nullptr, bx, by, step, mid, prev_dc);
                pack_block(blocks, block);
            }
            prev_dc = reconstruct_block(block, use_intra ? nullptr : pred, recon, bx, by, step,
                                        mid, maxv, prev_dc);
        }
    }
    w.bytes.insert(w.bytes.end(), bitmap.begin(), bitmap.end());
    w.bytes.insert(w.bytes.end(), blocks.bytes.begin(), blocks.bytes.end());
}

inline void decode_plane(ByteReader& r, const PaddedPlane* pred, PaddedPlane& recon, int w, int h,
                         int32_t step, int32_t mid, int32_t maxv) {
    recon = PaddedPlane::zeros(w, h);
    const int blocks_x = recon.pw / 8, blocks_y = recon.ph / 8;
    std::vector<uint8_t> bitmap(pred ? (static_cast<size_t>(blocks_x) * blocks_y + 7) / 8 : 0, 0);
    for (auto& b : bitmap) b = r.u8();
    int32_t block[64];
    int32_t prev_dc = 0;
    size_t block_index = 0;
    for (int by = 0; by < recon.ph; by += 8) {
        for (int bx = 0; bx < recon.pw; bx += 8, ++block_index) {
            unpack_block(r, block);
            bool use_intra = !pred || (bitmap[block_index / 8] >> (block_index % 8)) & 1;
            prev_dc = reconstruct_block(block, use_intra ? nullptr : pred, recon, bx, by, step,
                                        mid, maxv, prev_dc);
        }
    }
}

}  // namespace toy

inline std::vector<uint8_t> toy_encode(const std::vector<FrameBuffer>& frames, int qp,
                                       const GopMode& gop, Rational fps = {30, 1}) {
    if (qp < toy::kMinQp || qp > toy::kMaxQp)
        throw RangeError("toy qp " + std::to_string(qp) + " outside [0, 63]");
    if (frames.empty()) throw DimensionError("toy_encode requires at least one frame");
    const FrameFormat fmt = frames.front().fmt;
    fmt.validate();
    for (const auto& f : frames)
        if (f.fmt != fmt) throw DimensionError("toy_encode requires a consistent frame format");

    const int64_t interval = gop.intra_interval(fps);
    const int32_t step = qp + 1;
    const int32_t maxv = fmt.max_value();
    const int32_t mid = fmt.mid_value();

    toy::ByteWriter w;
    w.bytes.insert(w.bytes.end(), toy::kMagic, toy::kMagic + 4);
    w.u8(1);  // version
    w.u8(static_cast<uint8_t>(fmt.bit_depth));
    w.u8(fmt.chroma == Chroma::C420 ? 0 : 1);
    w.u8(static_cast<uint8_t>(qp));
    w.u32(static_cast<uint32_t>(fmt.width));
    w.u32(static_cast<uint32_t>(fmt.height));
    w.u32(static_cast<uint32_t>(frames.size()));
    w.u32(static_cast<uint32_t>(interval));
    w.u32(static_cast<uint32_t>(fps.num));
    w.u32(static_cast<uint32_t>(fps.den));

    toy::PaddedPlane recon_y, recon_cb, recon_cr;
    for (size_t i = 0; i < frames.size(); ++i) {
        bool intra = (interval == 0) ? i == 0 : (static_cast<int64_t>(i) % interval == 0);
        w.u8(intra ? 1 : 0);
        auto cur_y = toy::PaddedPlane::from(frames[i].y, fmt.width, fmt.height);
        auto cur_cb = toy::PaddedPlane::from(frames[i].cb, fmt.chroma_width(), fmt.chroma_height());
        auto cur_cr = toy::PaddedPlane::from(frames[i].cr, fmt.chroma_width(), fmt.chroma_height());
        toy::PaddedPlane ny, ncb, ncr;
        toy::code_plane(w, cur_y, intra ? nullptr : &recon_y, ny, step, mid, maxv);
        toy::code_plane(w, cur_cb, intra ? nullptr : &recon_cb, ncb, step, mid, maxv);
        toy::code_plane(w, cur_cr, intra ? nullptr : &recon_cr, ncr, step, mid, maxv);
        recon_y = std::move(ny);
        recon_cb = std::move(ncb);
        recon_cr = std::move(ncr);
    }
    return std::move(w.bytes);
}

struct ToyDecoded {
    VideoSpec spec;
    std::vector<FrameBuffer> frames;
    int qp = 0;
    int64_t intra_interval = 1;
};

inline ToyDecoded toy_decode(const std::vector<uint8_t>& stream) {
    toy::ByteReader r{stream.data(), stream.size()};
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::memcmp(magic, toy::kMagic, 4) != 0) throw ParseError("not a toy codec stream");
    if (r.u8() != 1) throw ParseError("unsupported toy stream version");

    ToyDecoded out;
    out.spec.bit_depth = r.u8();
    out.spec.chroma = r.u8() == 0 ? Chroma::C420 : Chroma::C444;
    out.qp = r.u8();
    out.spec.width = static_cast<int>(r.u32());
    out.spec.height = static_cast<int>(r.u32());
    uint32_t frame_count = r.u32();
    out.intra_interval = r.u32();
    out.spec.frame_rate.num = r.u32();
    out.spec.frame_rate.den = r.u32();
    out.spec.frame_count = frame_count;
    out.spec.validate();

    const FrameFormat fmt = out.spec.format();
    const int32_t step = out.qp + 1;
    const int32_t maxv = fmt.max_value();
    const int32_t mid = fmt.mid_value();

    toy::PaddedPlane recon_y, recon_cb, recon_cr;
    for (uint32_t i = 0; i < frame_count; ++i) {
        bool intra = r.u8() != 0;
        toy::PaddedPlane ny, ncb, ncr;
        toy::decode_plane(r, intra ? nullptr : &recon_y, ny, fmt.width, fmt.height, step, mid,
                          maxv);
        toy::decode_plane(r, intra ? nullptr : &recon_cb, ncb, fmt.chroma_width(),
                          fmt.chroma_height(), step, mid, maxv);
        toy::decode_plane(r, intra ? nullptr : &recon_cr, ncr, fmt.chroma_width(),
                          fmt.chroma_height(), step, mid, maxv);
        FrameBuffer f;
        f.fmt = fmt;
        ny.crop_to(f.y);
        ncb.crop_to(f.cb);
        ncr.crop_to(f.cr);
        out.frames.push_back(std::move(f));
        recon_y = std::move(ny);
        recon_cb = std::move(ncb);
        recon_cr = std::move(ncr);
    }
    return out;
}

}  // namespace vpcb

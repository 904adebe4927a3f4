#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vpcb/frame.hpp"

namespace vpcb {

// YUV4MPEG2 container I/O.
//
// Supported colorspace tags: C420, C444, C420p10, C444p10, C420p12, C444p12.
// C420jpeg/C420mpeg2/C420paldv are accepted as aliases of C420 (chroma siting
// is out of scope but external decoders commonly emit these tags).
// Samples above 8 bit are stored one per 16-bit little-endian container.

namespace detail {

struct Y4mTag {
    Chroma chroma;
    int bit_depth;
};

inline bool parse_colorspace(const std::string& tag, Y4mTag& out) {
    if (tag == "420" || tag == "420jpeg" || tag == "420mpeg2" || tag == "420paldv") {
        out = {Chroma::C420, 8};
    } else if (tag == "444") {
        out = {Chroma::C444, 8};
    } else if (tag == "420p10") {
        out = {Chroma::C420, 10};
    } else if (tag == "444p10") {
        out = {Chroma::C444, 10};
    } else if (tag == "420p12") {
        out = {Chroma::C420, 12};
    } else if (tag == "444p12") {
        out = {Chroma::C444, 12};
    } else {
        return false;
    }
    return true;
}

inline std::string colorspace_tag(const FrameFormat& fmt) {
    std::string tag = fmt.chroma == Chroma::C420 ? "420" : "444";
    if (fmt.bit_depth == 10) tag += "p10";
    if (fmt.bit_depth == 12) tag += "p12";
    return tag;
}

inline void read_plane(std::istream& in, std::vector<uint16_t>& plane, int bit_depth,
                       int64_t frame_index) {
    if (bit_depth == 8) {
        std::vector<unsigned char> raw(plane.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size())
            throw TruncationError("truncated frame payload at frame " + std::to_string(frame_index));
        for (size_t i = 0; i < raw.size(); ++i) plane[i] = raw[i];
    } else {
        std::vector<unsigned char> raw(plane.size() * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<size_t>(in.gcount()) != raw.size())
            throw TruncationError("truncated frame payload at frame " + std::to_string(frame_index));
        for (size_t i = 0; i < plane.size(); ++i)
            plane[i] = static_cast<uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    }
}

inline void write_plane(std::ostream& out, const std::vector<uint16_t>& plane, int bit_depth) {
    if (bit_depth == 8) {
        std::vector<unsigned char> raw(plane.size());
        for (size_t i = 0; i < plane.size(); ++i) raw[i] = static_cast<unsigned char>(plane[i]);
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    } else {
        std::vector<unsigned char> raw(plane.size() * 2);
        for (size_t i = 0; i < plane.size(); ++i) {
            raw[2 * i] = static_cast<unsigned char>(plane[i] & 0xff);
            raw[2 * i + 1] = static_cast<unsigned char>(plane[i] >> 8);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
}

}  // namespace detail

struct Y4mClip {
    VideoSpec spec;
    std::vector<FrameBuffer> frames;
};

inline Y4mClip read_y4m(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty stream, no YUV4MPEG2 header");

    std::istringstream tokens(header);
    std::string tok;
    tokens >> tok;
    if (tok != "YUV4MPEG2") throw ParseError("bad signature token \"" + tok + "\"");

    int width = -1, height = -1;
    Rational rate{0, 0};
    detail::Y4mTag cs{Chroma::C420, 8};  // Y4M default when C is absent
    while (tokens >> tok) {
        if (tok.empty()) continue;
        char key = tok[0];
        std::string val = tok.substr(1);
        try {
            switch (key) {
                case 'W': width = std::stoi(val); break;
                case 'H': height = std::stoi(val); break;
                case 'F': {
                    auto colon = val.find(':');
                    if (colon == std::string::npos) throw ParseError("");
                    rate = Rational{std::stoll(val.substr(0, colon)), std::stoll(val.substr(colon + 1))};
                    break;
                }
                case 'C':
                    if (!detail::parse_colorspace(val, cs))
                        throw FormatError("unsupported colorspace tag \"" + tok + "\"");
                    break;
                case 'I':
                case 'A':
                case 'X':
                    break;  // interlacing / aspect / extensions: ignored
                default:
                    throw ParseError("unrecognized header token \"" + tok + "\"");
            }
        } catch (const FormatError&) {
            throw;
        } catch (const ParseError& e) {
            if (e.what()[0] != '\0') throw;
            throw ParseError("malformed header token \"" + tok + "\"");
        } catch (const std::exception&) {
            throw ParseError("malformed header token \"" + tok + "\"");
        }
    }
    if (width <= 0 || height <= 0) throw ParseError("missing or invalid W/H header token");
    if (rate.num <= 0 || rate.den <= 0) throw ParseError("missing or invalid F header token");

    VideoSpec spec{width, height, cs.bit_depth, cs.chroma, rate, 0};
    spec.validate();
    FrameFormat fmt = spec.format();

    std::vector<FrameBuffer> frames;
    std::string frame_line;
    while (std::getline(in, frame_line)) {
        if (frame_line.empty()) continue;
        if (frame_line.rfind("FRAME", 0) != 0)
            throw ParseError("expected FRAME marker before frame " + std::to_string(frames.size()) +
                             ", got \"" + frame_line + "\"");
        FrameBuffer frame(fmt);
        int64_t idx = static_cast<int64_t>(frames.size());
        detail::read_plane(in, frame.y, fmt.bit_depth, idx);
        detail::read_plane(in, frame.cb, fmt.bit_depth, idx);
        detail::read_plane(in, frame.cr, fmt.bit_depth, idx);
        frames.push_back(std::move(frame));
    }
    spec.frame_count = static_cast<int64_t>(frames.size());
    return Y4mClip{spec, std::move(frames)};
}

inline void write_y4m(std::ostream& out, const VideoSpec& spec,
                      const std::vector<FrameBuffer>& frames) {
    spec.validate();
    FrameFormat fmt = spec.format();
    out << "YUV4MPEG2 W" << spec.width << " H" << spec.height << " F" << spec.frame_rate.num << ":"
        << spec.frame_rate.den << " C" << detail::colorspace_tag(fmt) << "\n";
    for (size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].fmt != fmt)
            throw DimensionError("frame " + std::to_string(i) + " does not match clip spec");
        out << "FRAME\n";
        detail::write_plane(out, frames[i].y, fmt.bit_depth);
        detail::write_plane(out, frames[i].cb, fmt.bit_depth);
        detail::write_plane(out, frames[i].cr, fmt.bit_depth);
    }
}

inline Y4mClip read_y4m_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read_y4m(in);
}

inline void write_y4m_file(const std::filesystem::path& path, const VideoSpec& spec,
                           const std::vector<FrameBuffer>& frames) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_y4m(out, spec, frames);
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace vpcb

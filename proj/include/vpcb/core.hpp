#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vpcb {

// Error hierarchy. Every failure that callers are expected to handle is a
// subclass of Error; message text carries the offending token/index/path.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };       // unsupported format/tag
class DimensionError : public Error { public: using Error::Error; };
class TruncationError : public Error { public: using Error::Error; };
class GeometryError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class ProcessError : public Error { public: using Error::Error; };      // external command failed
class AlignmentError : public Error { public: using Error::Error; };
class ConsistencyError : public Error { public: using Error::Error; };
class UnreachableError : public Error { public: using Error::Error; };  // quality floor not attainable

// Exact rational, used for frame rates.
struct Rational {
    int64_t num = 0;
    int64_t den = 1;

    constexpr bool operator==(const Rational&) const = default;

    double as_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    Rational normalized() const {
        int64_t g = std::gcd(num, den);
        if (g == 0) return *this;
        return Rational{num / g, den / g};
    }
};

inline std::string to_string(const Rational& r) {
    return std::to_string(r.num) + ":" + std::to_string(r.den);
}

// splitmix64: tiny, stable PRNG step used to derive independent substreams.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive seed mixing so substreams keyed by (seed, tag, tag, ...)
// never collide across stages.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + (tag << 6) + (tag >> 2));
    return splitmix64(s);
}

template <typename... Tags>
uint64_t mix_seed(uint64_t seed, uint64_t tag, Tags... rest) {
    return mix_seed(mix_seed(seed, tag), static_cast<uint64_t>(rest)...);
}

// Deterministic uniform/Gaussian sampler. Not std::normal_distribution on
// purpose: output must be reproducible across standard library versions.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // in [0, 1)
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    uint32_t next_below(uint32_t bound) {
        return static_cast<uint32_t>(next_u64() % bound);
    }

    // Box-Muller, one value per call (the pair's second half is cached).
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 1e-300) u1 = next_unit();
        double mag = std::sqrt(-2.0 * std::log(u1));
        double two_pi_u2 = 6.283185307179586476925286766559 * u2;
        spare_ = mag * std::sin(two_pi_u2);
        has_spare_ = true;
        return mag * std::cos(two_pi_u2);
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64, used for manifest provenance hashes.
inline uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& data) {
    uint64_t h = fnv1a64(data.data(), data.size());
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace vpcb

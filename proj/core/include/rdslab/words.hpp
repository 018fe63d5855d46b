#pragma once

#include <cstdint>
#include <stdexcept>

namespace rdslab {

/// Counter-based deterministic symbol stream.
///
/// Symbol i is a pure function of (seed, stream, i):
///
///     z      = seed ^ rotl64(stream, 17) ^ (0x9E3779B97F4A7C15 * i)
///     mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///               z ^= z >> 27; z *= 0x94D049BB133111EB;
///               z ^= z >> 31;
///     symbol = mix64(z) mod m
///
/// mix64 is the splitmix64 finalizer; all arithmetic is mod 2^64. Identical
/// (seed, stream, i) always reproduce the identical symbol, so experiments
/// partition work by stream index and stay schedule-independent.
struct WordStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    unsigned m = 1;

    WordStream() = default;
    WordStream(std::uint64_t seed_, std::uint64_t stream_, unsigned m_)
        : seed(seed_), stream(stream_), m(m_) {
        if (m == 0) throw std::invalid_argument("WordStream: m must be >= 1");
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
    std::uint64_t raw(std::uint64_t i) const {
        return mix64(seed ^ rotl(stream, 17) ^ (0x9E3779B97F4A7C15ULL * i));
    }

    /// Paper-side words are 1-based; internally symbols are 0-based.
    unsigned symbol(std::uint64_t i) const {
        return static_cast<unsigned>(raw(i) % m);
    }

    /// The shift sigma acts by incrementing the index offset.
    struct Shifted {
        const WordStream* ws;
        std::uint64_t offset;
        unsigned symbol(std::uint64_t i) const { return ws->symbol(i + offset); }
    };
    Shifted shifted(std::uint64_t j) const { return {this, j}; }
};

/// Uniform double in [0,1) from the same counter-based generator.
inline double u01(const WordStream& ws, std::uint64_t i) {
    return static_cast<double>(ws.raw(i) >> 11) * 0x1.0p-53;
}

}  // namespace rdslab

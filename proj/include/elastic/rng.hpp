#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace elastic {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: the output is a pure
// function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Separates draws that would otherwise share (stream, index).
enum class Purpose : std::uint32_t {
    CommonNoise = 1,
    Idiosyncratic = 2,
    InitialPosition = 3,
    Clock = 4,
    Bridge = 5,
    Pair = 6,
    Sample = 7,
};

// Uniform strictly inside (0,1) on the midpoints of a 2^-52 grid; every value is exact.
inline double u64_to_open_unit(std::uint64_t u) {
    return (static_cast<double>(u >> 12) + 0.5) * 0x1.0p-52;
}

// Keyed random access: every draw is addressed by (seed, purpose, stream, index).
class Stream {
public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          purpose_(static_cast<std::uint32_t>(purpose)), stream_(stream) {}

    PhiloxCounter block(std::uint64_t index) const;

    // Two independent uniforms in (0,1) from one block.
    std::pair<double, double> uniforms(std::uint64_t index) const;
    double uniform(std::uint64_t index) const { return uniforms(index).first; }

    // Two independent standard normals (Box-Muller on one block).
    std::pair<double, double> normals(std::uint64_t index) const;
    double normal(std::uint64_t index) const { return normals(index).first; }

    // Ziggurat normal drawn from blocks (index << 20) + j, j = 0, 1, ...
    // Cheaper than normal(); most draws consume half of one block.
    double ziggurat_normal(std::uint64_t index) const;

private:
    PhiloxKey key_;
    std::uint32_t purpose_;
    std::uint64_t stream_;
};

// Sequential convenience wrapper over a Stream; used by tests and samplers.
class SequenceRng {
public:
    SequenceRng(std::uint64_t seed, Purpose purpose, std::uint64_t stream)
        : s_(seed, purpose, stream) {}
    double uniform() { return s_.uniform(next_++); }
    double normal() { return s_.normal(next_++); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t below(std::uint64_t n);

private:
    Stream s_;
    std::uint64_t next_ = 0;
};

// SplitMix64 finalizer, used to derive child seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace elastic

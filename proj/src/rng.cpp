#include "elastic/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace elastic {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

PhiloxCounter Stream::block(std::uint64_t index) const {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32),
                            static_cast<std::uint32_t>(index),
                            (purpose_ << 24) | (static_cast<std::uint32_t>(index >> 32) & 0xFFFFFFu)};
    return philox4x32(ctr, key_);
}

std::pair<double, double> Stream::uniforms(std::uint64_t index) const {
    const auto b = block(index);
    const std::uint64_t u0 = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    const std::uint64_t u1 = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
    return {u64_to_open_unit(u0), u64_to_open_unit(u1)};
}

std::pair<double, double> Stream::normals(std::uint64_t index) const {
    const auto [u0, u1] = uniforms(index);
    const double r = std::sqrt(-2.0 * std::log(u0));
    const double theta = 2.0 * std::numbers::pi * u1;
    return {r * std::cos(theta), r * std::sin(theta)};
}

namespace {

// 64-bit words from consecutive blocks of one Stream, as a uniform random bit generator.
class BlockEngine {
public:
    using result_type = std::uint64_t;
    BlockEngine(const Stream& s, std::uint64_t first) : s_(s), next_(first) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        if (half_ == 2) {
            buf_ = s_.block(next_++);
            half_ = 0;
        }
        const std::uint64_t w = (static_cast<std::uint64_t>(buf_[2 * half_]) << 32) | buf_[2 * half_ + 1];
        ++half_;
        return w;
    }

private:
    const Stream& s_;
    std::uint64_t next_;
    PhiloxCounter buf_{};
    int half_ = 2;
};

}  // namespace

double Stream::ziggurat_normal(std::uint64_t index) const {
    BlockEngine eng(*this, index << 20);
    return boost::random::normal_distribution<double>(0.0, 1.0)(eng);
}

std::uint64_t SequenceRng::below(std::uint64_t n) {
    // Lemire-style rejection is overkill here; n is always small.
    const auto b = s_.block(next_++);
    const std::uint64_t u = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    return static_cast<std::uint64_t>(u64_to_open_unit(u) * static_cast<double>(n)) % n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace elastic

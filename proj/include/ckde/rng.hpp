#pragma once
/// \file rng.hpp
/// Counter-based Philox4x32-10 generator keyed by (master seed, substream).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ckde {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// SplitMix64 finalizer, used to derive substream ids from tuples.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Combine labels into one substream index (order matters).
constexpr std::uint64_t substream_id(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix64(mix64(mix64(a) ^ b) ^ c);
}

/// Deterministic stream of uniforms and normals.
///
/// Block i of the stream is philox(counter = [i, substream], key = seed), so
/// any (seed, substream) pair can be replayed in isolation.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t substream)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, substream_(substream) {}

    std::uint64_t seed() const { return (std::uint64_t(key_[1]) << 32) | key_[0]; }
    std::uint64_t substream() const { return substream_; }

    std::uint64_t next_u64() {
        if (used_ == 2) refill();
        const std::uint64_t v = (std::uint64_t(buf_[2 * used_ + 1]) << 32) | buf_[2 * used_];
        ++used_;
        return v;
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (both outputs used).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

private:
    void refill() {
        buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32),
                           std::uint32_t(substream_), std::uint32_t(substream_ >> 32)},
                          key_);
        ++block_;
        used_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t substream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ckde

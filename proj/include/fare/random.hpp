#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace fare {

// Deterministic random source with explicit substream derivation.
//
// Every piece of randomness in a run flows from one root seed through
// child() calls, so any sub-computation (a trial, a round, one ensemble
// member) can be replayed in isolation. Streams are xoshiro256++,
// seeded via splitmix64; derivation hashes (key, tag) with splitmix64
// steps. Results are identical across platforms for the same build.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : key_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    // Derives an independent child stream. Does not advance this stream.
    RandomSource child(std::uint64_t tag) const {
        std::uint64_t k = key_ ^ (0x9E3779B97F4A7C15ULL * (tag + 1));
        std::uint64_t s = k;
        return RandomSource(splitmix64(s));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire multiply-shift (no rejection loop,
    // bias below 2^-64 at these ranges).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(product >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller on the uniform stream. Generates a
    // pair per transform and caches the second value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t splitmix64(std::uint64_t& s) {
        s += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_{};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Tags for the documented seed-derivation tree:
//   root -> trial t -> {data, split, run}
//   run  -> round l -> {member i, sampling}
namespace stream {
inline constexpr std::uint64_t kTrial = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kSplit = 3;
inline constexpr std::uint64_t kRun = 4;
inline constexpr std::uint64_t kRound = 5;
inline constexpr std::uint64_t kMember = 6;
inline constexpr std::uint64_t kSample = 7;
}  // namespace stream

}  // namespace fare

#pragma once

#include <cstdint>
#include <limits>

namespace iterkit::rng {

// splitmix64 finalizer (pure mixing function).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// xoshiro256** stream, seeded from (seed, experiment_id, path_index) through
// splitmix64.  One stream per Monte-Carlo path: results are a pure function
// of the triple, so estimates do not depend on how paths are assigned to
// threads.  Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream() : Stream(0, 0, 0) {}

    Stream(std::uint64_t seed, std::uint64_t experiment_id,
           std::uint64_t path_index) {
        std::uint64_t x = mix64(seed + 0x9E3779B97F4A7C15ull);
        x = mix64(x ^ mix64(experiment_id + 0xBB67AE8584CAA73Bull));
        x = mix64(x ^ mix64(path_index + 0x3C6EF372FE94F82Bull));
        for (auto& w : s_) {
            x += 0x9E3779B97F4A7C15ull;
            w = mix64(x);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() {
        return std::numeric_limits<std::uint64_t>::max();
    }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0,1) with 53 random bits.
    double uniform01() { return double((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace iterkit::rng

#pragma once

#include <cstdint>

namespace bmc {

/**
 * Counter-based pseudo-random generator.
 *
 * The generator is a pure function of (key, counter): output i of stream
 * `key` is
 *
 *     out_i = mix64(key + i * 0x9E3779B97F4A7C15)
 *
 * where mix64 is the SplitMix64 finalizer (Steele/Lea/Flood mixing
 * constants). This is exactly the SplitMix64 sequence seeded at `key`,
 * written in counter form: the state is two 64-bit integers, there is no
 * platform entropy anywhere, and jumping to any position is O(1).
 *
 * Stream splitting: substream j of a master key is
 *
 *     child_key = mix64(mix64(master ^ 0xA3EC647659359ACD) + j * 0xDA942042E4DD58B5)
 *
 * The xor constant domain-separates key derivation from output generation,
 * so a child key never collides with an output of the parent stream by
 * construction of the mixing rounds. Trajectory i of a run uses substream i
 * of the run's master seed.
 */
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t ctr = 0;

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    explicit Rng(std::uint64_t k = 0) : key(k) {}

    static Rng substream(std::uint64_t master, std::uint64_t j) {
        return Rng(mix64(mix64(master ^ 0xA3EC647659359ACDull) + j * 0xDA942042E4DD58B5ull));
    }

    std::uint64_t next() {
        ctr += 1;
        return mix64(key + ctr * kGamma);
    }

    /// Uniform double in the open interval (0,1); never 0, safe under log().
    double u01() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), n >= 1. Debiased multiply-shift (Lemire).
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t x = next();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return u01() < p; }
};

}  // namespace bmc

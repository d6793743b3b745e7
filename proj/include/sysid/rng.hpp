#pragma once

/** @file
 * Reproducible random streams.
 *
 * A stream wraps `std::mt19937_64`, whose output sequence is fixed by the
 * C++ standard. Uniform and normal variates are derived here rather than
 * through `<random>` distributions, whose algorithms are implementation
 * defined, so a given seed yields the same draws on every platform.
 *
 * Per-trial seeds are derived with the SplitMix64 finalizer (Steele, Lea and
 * Flood, "Fast splittable pseudorandom number generators", 2014):
 *
 *     z += 0x9E3779B97F4A7C15
 *     z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *     z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *     z ^= z >> 31
 */

#include <cmath>
#include <cstdint>
#include <random>

namespace sysid {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Deterministic stream for trial `trial_index` of a campaign seeded with
/// `base_seed`.
inline Stream derive_stream(std::uint64_t base_seed, std::uint64_t trial_index) {
    return Stream(splitmix64(base_seed ^ splitmix64(trial_index)));
}

}  // namespace sysid

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace lcd {

/// Reproducible random source used throughout the library.
///
/// Raw stream: std::mt19937_64 seeded directly. All real-valued draws go
/// through explicit transforms of the raw 64-bit output (never through
/// std::uniform_real_distribution and friends, whose results are
/// implementation-defined), so a seed pins every downstream number:
///   * uniform01: top 53 bits scaled by 2^-53, in [0, 1)
///   * exponential(1): -log1p(-u)
///   * normal: Box-Muller pair, second value cached
/// Substreams for parallel replicates are derived by hashing
/// (seed, lane, counter) with splitmix64, see derive_stream below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Uniform magnitude on [a, b) with an independent random sign.
    double uniform_signed(double a, double b) {
        double mag = uniform(a, b);
        return (gen_() & 1u) ? mag : -mag;
    }

    /// Standard exponential, mean 1.
    double exponential() { return -std::log1p(-uniform01()); }

    /// Standard normal via Box-Muller; generates values in pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n), rejection-sampled so every value is exact.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// SplitMix64 finalizer; used to decorrelate substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent substream for (lane, counter) under a master seed. Replicate
/// r of grid point q uses derive_stream(seed, q, r), so results do not depend
/// on scheduling order.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t lane, std::uint64_t counter) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (0x517cc1b727220a95ull + lane));
    h = splitmix64(h ^ (0x2545f4914f6cdd1dull + counter));
    return Rng(h);
}

} // namespace lcd

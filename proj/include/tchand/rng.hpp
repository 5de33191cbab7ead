#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tchand {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG wrapper. All floating-point draws are generated from
// raw 64-bit output so results are identical across standard libraries
// (std::uniform_real_distribution is implementation-defined; this is not).
// child(tag) derives an independent stream, which keeps parallel code
// reproducible regardless of scheduling.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

    uint64_t u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_index(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = u64();
        while (x >= limit) x = u64();
        return x % n;
    }

    double gaussian() {
        // Box-Muller; second value discarded to keep the stream simple
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    Rng child(uint64_t tag) const {
        return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::mt19937_64 eng_;
};

} // namespace tchand

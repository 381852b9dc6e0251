// Seedable random source with platform-independent draws. std::mt19937_64
// is bit-exact everywhere; the distributions here avoid the unspecified
// std::uniform_* implementations.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace langid {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Derives an independent stream, e.g. one per search trial.
    std::uint64_t fork_seed() { return engine_() ^ 0x9E3779B97F4A7C15ull; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace langid

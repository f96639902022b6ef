#pragma once

#include <cstdint>
#include <random>

namespace tipping {

// Portable seeded generator. std::mt19937_64 is fully specified by the
// standard; the bounded/real draws below avoid the library-defined
// std::*_distribution classes so streams reproduce across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream for (seed, index), e.g. one per bootstrap resample.
    static Rng derived(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01();

    // Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);

    // Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace tipping

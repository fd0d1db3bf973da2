#pragma once

// Splittable counter-style generator for the noise-injection stepper.  Each
// repetition derives its own stream from (master seed, repetition index), so
// sweeps are reproducible regardless of how the work is distributed.
//
// The core transition is SplitMix64 (Steele, Lea & Flood, "Fast splittable
// pseudorandom number generators", OOPSLA 2014): a Weyl sequence with
// increment 0x9E3779B97F4A7C15 passed through a 64-bit finalizer.

#include <cstdint>

namespace saddle {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Seed for one repetition of a sweep, decorrelating the master seed and
    /// the repetition index through an extra finalizer round.
    static std::uint64_t derive(std::uint64_t master_seed, std::uint64_t index) {
        return finalize(master_seed + kGamma * (index + 1));
    }

    static SplitMix64 stream(std::uint64_t master_seed, std::uint64_t index) {
        return SplitMix64(derive(master_seed, index));
    }

    std::uint64_t next_u64() {
        state_ += kGamma;
        return finalize(state_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on [-1, 1).
    double next_symmetric() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-52 - 1.0; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace saddle

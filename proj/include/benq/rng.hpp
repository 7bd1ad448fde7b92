#pragma once

#include <cstdint>

namespace benq {

/// Counter-based generator: output c of stream `seed` is the SplitMix64
/// finalizer applied to seed + (c + 1) * 0x9E3779B97F4A7C15. Identical to the
/// c-th draw of a SplitMix64 sequence started at `seed`, but random-access,
/// so any element of a synthetic tensor can be produced independently.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1): top 53 bits scaled by 2^-53.
    constexpr double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1p-53;
    }

    constexpr std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

}  // namespace benq

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace kslab::rng {

/// SplitMix64 finalizer; bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive a substream key from a master seed and an ordered list of tags
/// (site, level, trial, ...).  Different tag lists give unrelated keys, so
/// draws never depend on the order in which substreams are consumed.
std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::int64_t> tags) noexcept;

/// Small counter-style generator (SplitMix64).  Satisfies
/// UniformRandomBitGenerator; copies are independent value-passed states.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key = 0) noexcept : state_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits; platform independent.
    double uniform() noexcept
    {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

inline Stream substream(std::uint64_t seed, std::initializer_list<std::int64_t> tags) noexcept
{
    return Stream(derive(seed, tags));
}

}  // namespace kslab::rng

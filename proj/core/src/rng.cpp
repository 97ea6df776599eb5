#include "kslab/rng.hpp"

namespace kslab::rng {

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::int64_t> tags) noexcept
{
    std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
    std::uint64_t position = 1;
    for (std::int64_t tag : tags) {
        h = mix64(h ^ mix64(static_cast<std::uint64_t>(tag) + 0x3c6ef372fe94f82bULL * position));
        ++position;
    }
    return h;
}

}  // namespace kslab::rng

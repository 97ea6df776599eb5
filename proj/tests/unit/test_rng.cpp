#include <doctest.h>

#include "kslab/rng.hpp"

#include <cstdint>
#include <set>

using namespace kslab;

namespace {

// Reference SplitMix64 written from the published algorithm.
std::uint64_t reference_next(std::uint64_t& s)
{
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

TEST_CASE("stream matches reference splitmix64")
{
    rng::Stream a(0);
    CHECK(a() == 0xe220a8397b1dcdafULL);
    for (std::uint64_t seed : {1ULL, 42ULL, 0xdeadbeefULL}) {
        rng::Stream s(seed);
        std::uint64_t r = seed;
        for (int i = 0; i < 1000; ++i)
            REQUIRE(s() == reference_next(r));
    }
}

TEST_CASE("uniform lies in [0,1) and has the right mean")
{
    rng::Stream s(7);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("derived keys depend on seed and tag order")
{
    std::set<std::uint64_t> keys;
    for (std::int64_t a = -20; a <= 20; ++a)
        for (std::int64_t b = 0; b < 20; ++b)
            keys.insert(rng::derive(5, {a, b}));
    CHECK(keys.size() == 41 * 20);
    CHECK(rng::derive(5, {1, 2}) != rng::derive(5, {2, 1}));
    CHECK(rng::derive(5, {1}) != rng::derive(6, {1}));
    CHECK(rng::derive(5, {1, 2}) == rng::derive(5, {1, 2}));
}

TEST_CASE("substream draws are independent of consumption order")
{
    rng::Stream a = rng::substream(9, {3});
    rng::Stream b = rng::substream(9, {4});
    const auto a0 = a();
    const auto b0 = b();
    rng::Stream b2 = rng::substream(9, {4});
    rng::Stream a2 = rng::substream(9, {3});
    CHECK(b2() == b0);
    CHECK(a2() == a0);
}

#include <doctest.h>

#include "kslab/diophantine.hpp"
#include "kslab/error.hpp"

#include <cmath>
#include <filesystem>

using namespace kslab;

namespace {

const char* kGolden = "0.6180339887498948482045868343656381177203091798057628621354486227";
const char* kPiFrac = "0.14159265358979323846264338327950288419716939937510582097494459";

// Pairwise scan over every n1 != n2 with |2n| < q_{k+1}, in long double.
long double brute_gap(long double alpha, std::int64_t n_max)
{
    long double best = 1.0L;
    for (std::int64_t n1 = -n_max; n1 <= n_max; ++n1)
        for (std::int64_t n2 = -n_max; n2 <= n_max; ++n2) {
            if (n1 == n2)
                continue;
            long double x = std::fmod(std::fabs(static_cast<long double>(n1 - n2) * alpha), 1.0L);
            best = std::min(best, std::min(x, 1.0L - x));
        }
    return best;
}

}  // namespace

TEST_CASE("rational expansion of 5/7")
{
    const auto c = continued_fraction(Frequency::parse("5/7"), 10);
    REQUIRE(c.size() == 4);
    CHECK(c.terminated());
    const int a[] = {0, 1, 2, 2}, p[] = {0, 1, 2, 5}, q[] = {1, 1, 3, 7};
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(c[k].a == a[k]);
        CHECK(c[k].p == p[k]);
        CHECK(c[k].q == q[k]);
    }
}

TEST_CASE("pi - 3 denominators")
{
    const auto c = continued_fraction(Frequency::parse(kPiFrac), 5);
    REQUIRE(c.size() == 6);
    const long long q[] = {1, 7, 106, 113, 33102, 33215};
    for (std::size_t k = 0; k < 6; ++k)
        CHECK(c[k].q == q[k]);
    CHECK(c[4].a == 292);
}

TEST_CASE("golden mean denominators are Fibonacci numbers")
{
    const auto c = continued_fraction(Frequency::parse(kGolden), 40);
    REQUIRE(c.size() == 41);
    BigInt f0 = 1, f1 = 1;
    CHECK(c[0].q == 1);
    for (std::size_t k = 1; k <= 40; ++k) {
        CHECK(c[k].a == 1);
        CHECK(c[k].q == f1);
        const BigInt f2 = f0 + f1;
        f0 = f1;
        f1 = f2;
    }
    // p_k q_{k-1} - p_{k-1} q_k = (-1)^{k-1}
    for (std::size_t k = 1; k <= 40; ++k) {
        const BigInt det = c[k].p * c[k - 1].q - c[k - 1].p * c[k].q;
        CHECK(det == (k % 2 == 1 ? 1 : -1));
    }
}

TEST_CASE("short decimals report the last safe depth")
{
    try {
        (void)continued_fraction(Frequency::parse("0.61803"), 40);
        FAIL("expected PrecisionError");
    } catch (const PrecisionError& e) {
        CHECK(e.last_safe_k() < 40);
        CHECK(e.partial().size() == e.last_safe_k() + 1);
        for (std::size_t k = 1; k < e.partial().size(); ++k)
            CHECK(e.partial()[k].a == 1);
    }
}

TEST_CASE("frequency parsing")
{
    CHECK_THROWS_AS(Frequency::parse(""), InvalidArgument);
    CHECK_THROWS_AS(Frequency::parse("1.5"), InvalidArgument);
    CHECK_THROWS_AS(Frequency::parse("7/5"), InvalidArgument);
    CHECK_THROWS_AS(Frequency::parse("0.12x"), InvalidArgument);
    const Frequency f = Frequency::parse("0.125");
    CHECK_FALSE(f.exact());
    CHECK(f.digits() == 3);
    CHECK(f.to_double() == 0.125);
    CHECK(Frequency::parse("3/8").exact());
}

TEST_CASE("convergent table csv round trip and validation")
{
    const auto c = continued_fraction(Frequency::parse(kPiFrac), 5);
    const auto path = std::filesystem::temp_directory_path() / "kslab_convergents.csv";
    c.write_csv(path);
    const auto back = Convergents::read_csv(path);
    REQUIRE(back.size() == c.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        CHECK(back[k].q == c[k].q);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Convergents({{0, 0, 1}, {1, 1, 2}}, std::nullopt, false), InvalidArgument);
}

TEST_CASE("gap check agrees with a pairwise scan")
{
    const auto golden = continued_fraction(Frequency::parse(kGolden), 20);
    const long double ga = 0.6180339887498948482045868343656381177L;
    for (std::size_t k = 0; k + 1 < 14; ++k) {
        const auto r = gap_check(golden, k);
        CHECK(r.holds);
        CHECK(r.bound == doctest::Approx(1.0 / (golden.q(k) + golden.q(k + 1))));
        if (r.n_max == 0)
            continue;
        CHECK(r.min_gap == doctest::Approx(static_cast<double>(brute_gap(ga, r.n_max))).epsilon(1e-12));
    }
    const auto pi = continued_fraction(Frequency::parse(kPiFrac), 5);
    const long double pa = 0.14159265358979323846264338327950288L;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto r = gap_check(pi, k);
        CHECK(r.holds);
        CHECK(r.chain_holds);
        if (r.n_max > 0)
            CHECK(r.min_gap == doctest::Approx(static_cast<double>(brute_gap(pa, r.n_max))).epsilon(1e-12));
    }
    CHECK_THROWS_AS(gap_check(pi, 5), OutOfRange);
}

TEST_CASE("condkappa partial sums match direct evaluation")
{
    const auto c = continued_fraction(Frequency::parse(kGolden), 30);
    const double kappa = 0.5, g = 0.3;
    const auto r = condkappa_partial(c, kappa, g, 20);
    REQUIRE(r.terms.size() == 20);
    double s = 0.0;
    for (std::size_t k = 1; k <= 20; ++k) {
        const double t = std::exp(-kappa * std::pow(c.q(k), 1.0 - 2.0 * g)) * std::pow(c.q(k + 1), g / 2.0);
        s += t;
        CHECK(r.terms[k - 1] == doctest::Approx(t).epsilon(1e-12));
    }
    CHECK(r.partial_sums.back() == doctest::Approx(s).epsilon(1e-12));
    CHECK_THROWS_AS(condkappa_partial(c, kappa, 0.6, 5), InvalidArgument);
    CHECK_THROWS_AS(condkappa_partial(c, kappa, g, 30), OutOfRange);
}

TEST_CASE("constant-scale summability series has a closed form")
{
    // a_n = a: term n >= 1 is 2 a^{-1/2} exp(-d floor((n-1)/2) min(a^2, lambda)).
    const double a = 0.7, d = 1.0, lambda = 0.25;
    SummabilityParams p;
    p.scale = [a](std::int64_t) { return a; };
    p.d = d;
    p.lambda = lambda;
    const auto r = summability_partial(SeriesKind::thm_bs, p, 400);
    const double m = std::min(a * a, lambda);
    const double rho = std::exp(-d * m);
    // sum over n >= 1 groups pairs (2j+1, 2j+2) sharing floor((n-1)/2) = j.
    const double closed = 1.0 / std::sqrt(a) + 2.0 / std::sqrt(a) * 2.0 / (1.0 - rho);
    CHECK(r.partial_sums.back() == doctest::Approx(closed).epsilon(1e-12));
    CHECK(r.converged);
    CHECK(r.terms[0] == doctest::Approx(1.0 / std::sqrt(a)));

    SummabilityParams bad;
    CHECK_THROWS_AS(summability_partial(SeriesKind::thm_bs, bad, 10), InvalidArgument);
    CHECK_THROWS_AS(summability_partial(SeriesKind::thm_bs, p, 0), InvalidArgument);
    CHECK(parse_series_kind("e111-e222") == SeriesKind::e111_e222);
    CHECK_THROWS_AS(parse_series_kind("nope"), InvalidArgument);
}

TEST_CASE("block decomposition reproduces the positive-side series")
{
    const auto c = continued_fraction(Frequency::parse(kGolden), 40);
    const double g = 0.4, delta = 0.5;
    const auto blocks = e111_blocks(c, g, delta, 5000);
    REQUIRE(!blocks.empty());
    const auto a = block_scale(c, g);
    // Direct evaluation of sum_{n=1}^{last} exp(-delta sum_{s<=n} a_s^2) a_n^{-1/2}.
    double prefix = 0.0, direct = 0.0, from_blocks = 0.0;
    std::int64_t last = blocks.back().last;
    for (std::int64_t n = 1; n <= last; ++n) {
        prefix += a(n) * a(n);
        direct += std::exp(-delta * prefix) / std::sqrt(a(n));
    }
    double pre = 0.0;
    for (std::int64_t n = 1; n < blocks.front().first; ++n) {
        pre += a(n) * a(n);
        from_blocks += std::exp(-delta * pre) / std::sqrt(a(n));
    }
    for (const auto& b : blocks)
        from_blocks += b.contribution;
    CHECK(from_blocks == doctest::Approx(direct).epsilon(1e-12));
    for (std::size_t i = 1; i < blocks.size(); ++i)
        CHECK(blocks[i].first == blocks[i - 1].last + 1);
    // block scale: a_n = (100 q_{k+1})^{-g} with q_k <= |2n| < q_{k+1}
    CHECK(a(0) == doctest::Approx(std::pow(100.0 * c.q(1), -g)));
    CHECK(a(4) == doctest::Approx(std::pow(100.0 * 13.0, -g)));
    CHECK(a(-4) == a(4));
}

#include <doctest.h>

#include "kslab/diophantine.hpp"
#include "kslab/error.hpp"
#include "kslab/potentials.hpp"

#include <cmath>
#include <filesystem>

using namespace kslab;

namespace {

// Level condition written directly: eps^{-5/2} exp(-gamma n eps^2) < 2^{-k}.
bool oracle_condition(double e, double gamma, std::int64_t n, std::size_t k)
{
    return -2.5 * std::log(e) - gamma * static_cast<double>(n) * e * e <
           -static_cast<double>(k) * std::log(2.0);
}

// Exhaustive search for n_0..n_K.
std::vector<std::int64_t> oracle_levels(double eps, double gamma, std::size_t K)
{
    const auto e = [eps](std::size_t k) { return eps * std::pow(2.0, -static_cast<double>(k) - 2.0); };
    std::vector<std::int64_t> n{1};
    while (!oracle_condition(e(1), gamma, n[0], 1))
        ++n[0];
    for (std::size_t k = 1; k <= K; ++k) {
        const std::int64_t base = 2 * n[k - 1] + 1;
        std::int64_t j = 3;
        while (!oracle_condition(e(k + 1), gamma, (j * base - 1) / 2, k + 1))
            j += 2;
        n.push_back((j * base - 1) / 2);
    }
    return n;
}

LinearFunctional single(std::int64_t site, double b)
{
    LinearFunctional f;
    f.coefficients[site] = b;
    return f;
}

}  // namespace

TEST_CASE("level sequences match exhaustive search")
{
    for (auto [eps, gamma] : {std::pair{0.1, 1000.0}, std::pair{0.5, 50.0}, std::pair{0.3, 3000.0}}) {
        const Sequences s = gen_sequences(eps, gamma, 3);
        const auto expect = oracle_levels(eps, gamma, 3);
        REQUIRE(s.n_levels.size() == 4);
        for (std::size_t k = 0; k <= 3; ++k) {
            CHECK(s.n_levels[k] == expect[k]);
            CHECK(s.level_eps[k] == doctest::Approx(eps * std::pow(2.0, -double(k) - 2.0)));
            CHECK(sequence_condition(s.level_eps.size() > k + 1 ? s.level_eps[k + 1]
                                                                : default_level_eps(eps, k + 1),
                                     gamma, s.n_levels[k], k + 1));
        }
        for (std::size_t k = 1; k <= 3; ++k) {
            const std::int64_t q = (2 * s.n_levels[k] + 1) / (2 * s.n_levels[k - 1] + 1);
            CHECK((2 * s.n_levels[k] + 1) % (2 * s.n_levels[k - 1] + 1) == 0);
            CHECK(q % 2 == 1);
            CHECK(q >= 3);
        }
        CHECK(s.tail_after(3) == doctest::Approx(eps * std::pow(2.0, -5.0)));
    }
}

TEST_CASE("level cap raises with partial levels")
{
    try {
        (void)gen_sequences(0.1, 1000.0, 30, 100000);
        FAIL("expected CapError");
    } catch (const CapError& e) {
        CHECK(!e.partial().n_levels.empty());
        for (auto n : e.partial().n_levels)
            CHECK(n <= 100000);
    }
}

TEST_CASE("periodic site folding")
{
    for (std::int64_t nk : {0, 1, 5, 75})
        for (std::int64_t n = -400; n <= 400; ++n) {
            const std::int64_t p = periodic_site(n, nk);
            CHECK(std::abs(p) <= nk);
            CHECK((n - p) % (2 * nk + 1) == 0);
        }
}

TEST_CASE("partition lookup")
{
    const Partition p = Partition::symmetric({2, 7, 22});
    CHECK(p.m_first() == -3);
    CHECK(p.m_last() == 2);
    CHECK(p.first_covered() == -22);
    CHECK(p.last_covered() == 22);
    CHECK(p.m_of(0) == 0);
    CHECK(p.m_of(2) == 0);
    CHECK(p.m_of(-2) == 0);
    CHECK(p.m_of(-3) == -1);
    CHECK(p.m_of(3) == 1);
    CHECK(p.m_of(-8) == -2);
    CHECK(p.m_of(22) == 2);
    CHECK_THROWS_AS(p.m_of(23), OutOfRange);
}

TEST_CASE("ks sample decomposes into its parts and stays in the support")
{
    KsSpec spec;
    spec.scale = [](std::int64_t n) { return 1.0 / (1.0 + std::abs(double(n))); };
    spec.background = [](std::int64_t n) { return 0.1 * double(n % 3); };
    spec.functional = [](std::int64_t n) {
        return n == 0 ? LinearFunctional{} : single(n > 0 ? n - 1 : n + 1, 0.5);
    };
    spec.plus_bound = 0.5;
    const std::int64_t L = 20;
    const KsSample s = sample_ks_potential(spec, L, 99);
    REQUIRE(s.window.size() == 41);
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = static_cast<std::size_t>(n + L);
        CHECK(s.xi[i] >= 0.0);
        CHECK(s.xi[i] <= spec.scale(n));
        const double inner = n == 0 ? 0.0 : 0.5 * s.xi[static_cast<std::size_t>((n > 0 ? n - 1 : n + 1) + L)];
        CHECK(s.functional_term[i] == doctest::Approx(inner));
        CHECK(s.window.values[i] == doctest::Approx(s.xi[i] + spec.background(n) + inner));
    }
    // Deterministic in the seed, different across seeds.
    CHECK(sample_ks_potential(spec, L, 99).window.values == s.window.values);
    CHECK(sample_ks_potential(spec, L, 100).window.values != s.window.values);
    // A shorter window is the restriction of a longer one.
    const KsSample small = sample_ks_potential(spec, 5, 99);
    for (std::int64_t n = -5; n <= 5; ++n)
        CHECK(small.window.at(n) == s.window.at(n));
}

TEST_CASE("ks structural violations")
{
    KsSpec spec;
    spec.functional = [](std::int64_t n) { return single(n, 1.0); };
    CHECK_THROWS_AS(sample_ks_potential(spec, 3, 1), SpecViolation);
    spec.functional = [](std::int64_t n) {
        return n == 0 ? LinearFunctional{} : single(0, 2.0);
    };
    spec.plus_bound = 1.0;
    CHECK_THROWS_AS(sample_ks_potential(spec, 3, 1), SpecViolation);
    KsSpec neg;
    neg.scale = [](std::int64_t n) { return n == 2 ? 0.0 : 1.0; };
    CHECK_THROWS_AS(sample_ks_potential(neg, 3, 1), SpecViolation);
}

TEST_CASE("limit-periodic approximants are periodic and converge")
{
    LimitPeriodicSpec spec;
    spec.eps = 0.1;
    spec.gamma = 1000.0;
    spec.levels = 2;
    const Sequences seq = gen_sequences(spec.eps, spec.gamma, spec.levels);
    const std::int64_t L = seq.n_levels[1];
    const auto r = limit_periodic_potential(spec, L, 5);
    REQUIRE(r.approximants.size() == 3);
    CHECK(r.sup_norm <= spec.eps / 2.0 + 1e-15);
    for (const auto& a : r.approximants) {
        CHECK(a.period == 2 * seq.n_levels[a.level] + 1);
        for (std::int64_t n = -L; n + a.period <= L; ++n)
            CHECK(a.window.at(n) == a.window.at(n + a.period));
        const double tail = spec.eps * std::pow(2.0, -double(a.level) - 2.0);
        for (std::int64_t n = -L; n <= L; ++n) {
            const double d = r.perturbation.at(n) - a.window.at(n);
            CHECK(d >= -1e-15);
            CHECK(d <= tail + 1e-15);
        }
    }
    CHECK_THROWS_AS(limit_periodic_potential(spec, seq.n_levels[2] + 1, 5), OutOfRange);
}

TEST_CASE("qp bump orbit gaps, blocks and functionals")
{
    QpBumpSpec spec;
    spec.eps = 0.2;
    const std::int64_t L = 60;
    const auto r = qp_bump_potential(spec, L, 3);
    const double alpha = spec.alpha.to_double();
    double gap = 1.0;
    for (std::int64_t i = -L; i <= L; ++i)
        for (std::int64_t j = i + 1; j <= L; ++j) {
            double x = std::fmod(std::abs(double(j - i) * alpha), 1.0);
            gap = std::min(gap, std::min(x, 1.0 - x));
        }
    CHECK(r.min_orbit_gap == doctest::Approx(gap).epsilon(1e-9));

    double sum = 0.0;
    std::vector<int> covered(2 * L + 1, 0);
    for (const Block& b : r.blocks) {
        CHECK(b.max_amplitude <= b.threshold);
        sum += b.max_amplitude;
        for (std::int64_t n = std::max(-L, b.first); n <= std::min(L, b.last); ++n) {
            ++covered[static_cast<std::size_t>(n + L)];
            CHECK(bump_amplitude(spec.eps, spec.exponent, n) <= b.max_amplitude);
        }
    }
    for (int c : covered)
        CHECK(c == 1);
    CHECK(r.block_sum == doctest::Approx(sum));
    CHECK(r.window.sup_norm() <= r.window.declared_bound);

    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = static_cast<std::size_t>(n + L);
        CHECK(r.amplitudes[i] == doctest::Approx(spec.eps / 100.0 * std::pow(1.0 + std::abs(double(n)), -spec.exponent)));
        CHECK(r.functionals[i].reach() < std::abs(n) + (n == 0 ? 1 : 0));
        double v = r.background[i] + r.amplitudes[i] * r.xi[i];
        for (auto [m, b] : r.functionals[i].coefficients)
            v += b * r.xi[static_cast<std::size_t>(m + L)];
        CHECK(r.window.values[i] == doctest::Approx(v));
    }
    QpBumpSpec rational;
    rational.alpha = Frequency::parse("3/7");
    CHECK_THROWS_AS(qp_bump_potential(rational, 10, 1), InvalidArgument);
}

TEST_CASE("hoelder tent and width")
{
    const double eps = 0.01, g = 0.4;
    CHECK(holder_tent(0.3, eps, g, 0.3) == doctest::Approx(std::pow(eps, g)));
    CHECK(holder_tent(0.3, eps, g, 0.305) == doctest::Approx(std::pow(eps, g) / 2.0));
    CHECK(holder_tent(0.3, eps, g, 0.31) == 0.0);
    CHECK(holder_tent(0.995, eps, g, 0.0) == doctest::Approx(std::pow(eps, g) / 2.0));
    CHECK_THROWS_AS(holder_tent(0.0, 0.6, g, 0.0), InvalidArgument);

    const auto c = continued_fraction(
        Frequency::parse("0.6180339887498948482045868343656381177203091798057628621354486227"), 30);
    CHECK(holder_width(c, 0) == 0.0);
    CHECK(holder_width(c, 4) == doctest::Approx(1.0 / 1300.0));
    CHECK(holder_width(c, -4) == holder_width(c, 4));

    const auto mu = [](std::int64_t) { return 1.0; };
    const HolderSum G(c, g, mu, 300);
    for (double x : {0.0, 0.123, 0.5, 0.618, 0.99}) {
        const HolderValue v = holder_G(c, g, mu, x, 300);
        CHECK(G(x) == doctest::Approx(v.value).epsilon(1e-12));
        CHECK(v.value >= 0.0);
        CHECK(v.value <= v.total_bound);
    }
}

TEST_CASE("potential window csv round trip")
{
    PotentialWindow w;
    w.first_site = -2;
    w.values = {0.1, -0.2, 1.0 / 3.0, 4.0, 5e-300};
    const auto path = std::filesystem::temp_directory_path() / "kslab_window.csv";
    w.write_csv(path);
    const auto back = PotentialWindow::read_csv(path);
    CHECK(back.first_site == -2);
    CHECK(back.values == w.values);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(w.at(3), OutOfRange);
    CHECK(w.sup_norm() == 4.0);
    CHECK(PotentialWindow::zero(3).size() == 7);
}

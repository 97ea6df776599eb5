#include <doctest.h>

#include "kslab/distributions.hpp"
#include "kslab/error.hpp"
#include "kslab/rng.hpp"

#include <cmath>

using namespace kslab;

namespace {

double sinc_sq_uniform(double k)
{
    if (k == 0.0)
        return 1.0;
    const double s = 2.0 * std::sin(k / 2.0) / k;
    return s * s;
}

// Triangle density on [0, 2] peaking at 1: its transform is the square of the
// uniform transform, so |r^|^2 is the uniform value squared.
Density triangle()
{
    return Density::tabulated({{0.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}});
}

}  // namespace

TEST_CASE("uniform density basics")
{
    const Density u = Density::uniform();
    CHECK(u.support().lo == 0.0);
    CHECK(u.support().hi == 1.0);
    CHECK(u.sup_bound() == 1.0);
    CHECK(u.evaluate(0.5) == 1.0);
    CHECK(u.evaluate(1.5) == 0.0);
    CHECK(u.cdf(0.25) == doctest::Approx(0.25));
    CHECK(u.quantile(0.75) == doctest::Approx(0.75));
    for (double k : {0.0, 0.1, 1.0, 3.0, 6.2831853071795862, 40.0})
        CHECK(u.fourier_sq(k) == doctest::Approx(sinc_sq_uniform(k)).epsilon(1e-12));
}

TEST_CASE("tabulated triangle density transform equals squared uniform transform")
{
    const Density t = triangle();
    CHECK(t.sup_bound() == 1.0);
    CHECK(t.cdf(1.0) == doctest::Approx(0.5));
    CHECK(t.cdf(0.5) == doctest::Approx(0.125));
    CHECK(t.quantile(0.125) == doctest::Approx(0.5));
    CHECK(t.quantile(0.875) == doctest::Approx(1.5));
    for (double k : {0.0, 0.3, 2.0, 7.0, 25.0}) {
        const double u = sinc_sq_uniform(k);
        CHECK(t.fourier_sq(k) == doctest::Approx(u * u).epsilon(1e-10));
    }
}

TEST_CASE("tabulated density validation")
{
    CHECK_THROWS_AS(Density::tabulated({{0.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(Density::tabulated({{0.0, 1.0}, {0.0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(Density::tabulated({{0.0, 2.0}, {1.0, 2.0}}), InvalidArgument);
    CHECK_THROWS_AS(Density::tabulated({{0.0, -1.0}, {1.0, 3.0}}), InvalidArgument);
}

TEST_CASE("sampling follows the quantile")
{
    const Density t = triangle();
    rng::Stream s(11);
    double mean = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = t.sample(s);
        REQUIRE(t.support().contains(x));
        mean += x;
    }
    CHECK(mean / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("rescaled density")
{
    const ScaledDensity r = rescale(Density::uniform(), 0.5);
    CHECK(r.support().hi == doctest::Approx(0.5));
    CHECK(r.sup_bound() == doctest::Approx(2.0));
    CHECK(r.evaluate(0.25) == doctest::Approx(2.0));
    CHECK(r.fourier_sq(4.0) == doctest::Approx(sinc_sq_uniform(2.0)));
    CHECK_THROWS_AS(rescale(Density::uniform(), 0.0), InvalidArgument);
    CHECK_THROWS_AS(rescale(Density::uniform(), -1.0), InvalidArgument);
}

TEST_CASE("decay constant of the uniform density")
{
    // On [lambda, 1] |r^|^2 is monotone and -log|r^(k)|^2 / k^2 increases from 1/12.
    const DecayConstant dc = decay_constant(Density::uniform(), 0.01, 1.0);
    CHECK(dc.c == doctest::Approx(1.0 / 12.0).epsilon(1e-3));
    CHECK(dc.c == doctest::Approx(-std::log(sinc_sq_uniform(0.01)) / 1e-4).epsilon(1e-9));
    CHECK(decay_constant_holds(Density::uniform(), dc));
    DecayConstant bigger = dc;
    bigger.c *= 1.01;
    CHECK_FALSE(decay_constant_holds(Density::uniform(), bigger));

    const DecayConstant wide = decay_constant(Density::uniform(), 0.01, 100.0);
    CHECK(wide.c > 0.0);
    CHECK(wide.c < dc.c);
    CHECK(decay_constant_holds(Density::uniform(), wide));
    CHECK_THROWS_AS(decay_constant(Density::uniform(), 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(decay_constant(Density::uniform(), 2.0, 1.0), InvalidArgument);
}

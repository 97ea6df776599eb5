#include <doctest.h>

#include "kslab/error.hpp"
#include "kslab/potentials.hpp"
#include "kslab/rng.hpp"
#include "kslab/spectra.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace kslab;

namespace {

PotentialWindow random_window(std::int64_t L, double scale, std::uint64_t seed)
{
    PotentialWindow w;
    w.first_site = -L;
    rng::Stream s(seed);
    for (std::int64_t n = -L; n <= L; ++n)
        w.values.push_back(scale * (s.uniform() - 0.5));
    return w;
}

Eigen::MatrixXd dense(const PotentialWindow& w)
{
    const auto n = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        H(i, i) = w.values[static_cast<std::size_t>(i)];
        if (i + 1 < n)
            H(i, i + 1) = H(i + 1, i) = 1.0;
    }
    return H;
}

}  // namespace

TEST_CASE("eigenvalues match a dense solver")
{
    for (auto [L, scale] : {std::pair<std::int64_t, double>{0, 1.0}, {3, 0.0}, {10, 2.0}, {50, 8.0}}) {
        const auto w = random_window(L, scale, 17 + L);
        const auto e = eigen(build(w));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(dense(w));
        REQUIRE(e.eigenvalues.size() == w.size());
        for (std::size_t k = 0; k < w.size(); ++k)
            CHECK(e.eigenvalues[k] == doctest::Approx(ref.eigenvalues()[static_cast<Eigen::Index>(k)]).epsilon(1e-10).scale(1.0));
        CHECK(e.residual <= e.residual_tolerance);
        const auto o = check_orthonormality(e);
        CHECK(o.max_norm_error < 1e-10);
        CHECK(o.max_overlap < 1e-10);
        CHECK(o.strictly_ordered);
        // Eigenvector agrees with the dense one up to sign.
        for (std::size_t k = 0; k < w.size(); ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i)
                dot += e.vectors[k * w.size() + i] * ref.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("free laplacian has the closed-form spectrum")
{
    const std::int64_t N = 101;
    PotentialWindow w = PotentialWindow::zero(50);
    const auto e = eigen(build(w));
    for (std::int64_t k = 1; k <= N; ++k)
        CHECK(e.eigenvalues[static_cast<std::size_t>(N - k)] ==
              doctest::Approx(2.0 * std::cos(std::numbers::pi * double(k) / double(N + 1))).epsilon(1e-12).scale(1.0));
    CHECK(build(w).sigma0().lo == -2.0);
}

TEST_CASE("sturm counts agree with eigenvalues")
{
    const auto w = random_window(20, 4.0, 3);
    const auto e = eigen(build(w));
    for (double x = -7.0; x <= 7.0; x += 0.37) {
        std::size_t below = 0;
        for (double v : e.eigenvalues)
            below += v < x ? 1 : 0;
        CHECK(sturm_count(w.values, x) == below);
    }
}

TEST_CASE("amplitude agrees with the dense propagator")
{
    const auto w = random_window(8, 3.0, 4);
    const auto e = eigen(build(w));
    const Eigen::MatrixXd H = dense(w);
    for (double t : {0.0, 0.7, 5.0}) {
        const Eigen::MatrixXcd U = (std::complex<double>(0.0, -t) * H.cast<std::complex<double>>()).exp();
        for (std::int64_t n : {-8, -1, 0, 5})
            for (std::int64_t m : {-3, 0, 8}) {
                const auto a = amplitude(e, n, m, t);
                const auto ref = U(n + 8, m + 8);
                CHECK(std::abs(a - ref) < 1e-10);
            }
    }
}

TEST_CASE("correlator properties")
{
    const auto w = random_window(15, 2.0, 8);
    const auto e = eigen(build(w));
    for (std::int64_t n = -15; n <= 15; ++n) {
        // sum_k phi_k(n)^2 = 1
        CHECK(correlator(e, n, n) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::int64_t m = -15; m <= 15; m += 5) {
            CHECK(correlator(e, n, m) == doctest::Approx(correlator(e, m, n)));
            CHECK(correlator(e, n, m) <= 1.0 + 1e-12);
            CHECK(std::abs(amplitude(e, n, m, 1.3)) <= correlator(e, n, m) + 1e-12);
        }
    }
    const auto row = correlator_row(e, 0);
    REQUIRE(row.size() == 31);
    CHECK(row[15] == doctest::Approx(1.0));
    CHECK_THROWS_AS(correlator(e, 16, 0), OutOfRange);
}

TEST_CASE("degenerate input")
{
    CHECK_THROWS_AS(TridiagonalOperator({}, 0), InvalidArgument);
    PotentialWindow huge = PotentialWindow::zero(2);
    huge.values[2] = 1.7e308;
    huge.values[1] = -1.7e308;
    CHECK_THROWS_AS(eigen(build(huge)), NumericalFailure);
}

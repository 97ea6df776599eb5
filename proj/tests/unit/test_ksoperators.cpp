#include <doctest.h>

#include "kslab/distributions.hpp"
#include "kslab/error.hpp"
#include "kslab/ksoperators.hpp"
#include "kslab/potentials.hpp"
#include "kslab/rng.hpp"
#include "kslab/spectra.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

using namespace kslab;

namespace {

GridSpec small_grid(double E)
{
    return GridSpec::covering(1e-2, 1e2, 200, {E, E}, Density::uniform().support(), 0.05);
}

double dense_norm(const Eigen::SparseMatrix<double>& A)
{
    const Eigen::MatrixXd dense = A;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    return svd.singularValues()(0);
}

SampledFunction bump_on(const std::vector<double>& nodes, double neg_weight)
{
    SampledFunction f;
    f.nodes = nodes;
    for (double y : nodes) {
        const double l = std::log(std::abs(y)) - 0.5;
        f.values.push_back((y > 0 ? 1.0 : neg_weight) * std::exp(-l * l) / std::sqrt(std::abs(y)));
    }
    return f;
}

}  // namespace

TEST_CASE("grid construction")
{
    const GridSpec g = small_grid(0.5);
    const auto ys = g.y_grid();
    REQUIRE(ys.size() == 400);
    CHECK(ys.front().lo == doctest::Approx(-1e2));
    CHECK(ys.back().hi == doctest::Approx(1e2));
    for (const Cell& c : ys)
        CHECK((c.lo >= 1e-2 - 1e-15 || c.hi <= -1e-2 + 1e-15));
    const auto xs = g.x_grid();
    // Every E - 1/y - supp lies inside the x range.
    CHECK(g.x_lo <= 0.5 - 1.0 / 1e-2 - 1.0);
    CHECK(g.x_hi >= 0.5 + 1.0 / 1e-2);
    CHECK(xs.front().lo == g.x_lo);
    CHECK(xs.back().hi == doctest::Approx(g.x_hi));
    GridSpec bad = GridSpec::square_grid(1e-1, 5.0, 10);
    CHECK(!bad.warnings().empty());
    CHECK_THROWS_AS(GridSpec::square_grid(1.0, 0.5, 10).y_grid(), InvalidArgument);
}

TEST_CASE("S columns integrate to one and T columns to the mean of 1/|y|")
{
    const double E = 0.3;
    const GridSpec g = small_grid(E);
    const auto d = rescale(Density::uniform(), 1.0);
    const OperatorMatrix S = build_S(d, E, g);
    const OperatorMatrix T = build_T(d, E, g);
    const auto s = S.column_sums();
    const auto t = T.column_sums();
    for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(s[j] == doctest::Approx(1.0).epsilon(1e-4));
        const Cell& c = T.y_cells[j];
        const double mean_inv = std::log(std::abs(c.hi) / std::abs(c.lo)) * (c.lo < 0 ? -1.0 : 1.0) / c.width();
        CHECK(t[j] == doctest::Approx(mean_inv).epsilon(1e-4));
    }
    CHECK(op_norm(S, 1, 1) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(op_norm(S, 1, 2) <= std::sqrt(d.sup_bound()) * (1.0 + 1e-4));
    CHECK(S.max_average() <= d.sup_bound() * (1.0 + 1e-12));
    CHECK_THROWS_AS(op_norm(S, 2, 1), InvalidArgument);
}

TEST_CASE("lanczos and power iteration agree with a dense SVD")
{
    rng::Stream s(21);
    Eigen::SparseMatrix<double> A(60, 45);
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < 300; ++i)
        trip.emplace_back(int(s() % 60), int(s() % 45), s.uniform() - 0.3);
    A.setFromTriplets(trip.begin(), trip.end());
    const double ref = dense_norm(A);
    CHECK(lanczos_norm(A) == doctest::Approx(ref).epsilon(1e-9));
    CHECK(power_norm(A, 1e-13, 200000) == doctest::Approx(ref).epsilon(1e-8));

    const GridSpec g = GridSpec::square_grid(0.1, 10.0, 40);
    const OperatorMatrix T = build_T(rescale(Density::uniform(), 0.5), 0.2, g);
    const auto M = T.orthonormal();
    const double dn = dense_norm(M);
    CHECK(op_norm(T, 2, 2) == doctest::Approx(dn).epsilon(1e-9));
    CHECK(power_norm(M, 1e-13, 200000) == doctest::Approx(dn).epsilon(1e-8));
}

TEST_CASE("reflections: U is an involutive isometry, U0 only sees the positive half")
{
    const auto nodes = reciprocal_nodes(1e-3, 4001);
    REQUIRE(nodes.size() == 8002);
    for (std::size_t i = 0; i < 4001; ++i) {
        CHECK(nodes[i] == -nodes[nodes.size() - 1 - i]);
        CHECK(nodes[4001 + i] * nodes[nodes.size() - 1 - i] == doctest::Approx(1.0).epsilon(1e-12));
    }
    const SampledFunction f = bump_on(nodes, 0.5);
    const Reflected u = apply_U(f);
    CHECK(u.outside == 0);
    CHECK(u.f.l2_norm() == doctest::Approx(f.l2_norm()).epsilon(1e-3));
    const Reflected uu = apply_U(u.f);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        CHECK(std::abs(uu.f.values[i] - f.values[i]) <= 1e-9 * std::abs(f.values[i]) + 1e-15);

    // U0 f is even and built from the positive half: ||U0 f||^2 = 2 ||f_+||^2.
    const Reflected u0 = apply_U0(f);
    const SampledFunction only_pos = bump_on(nodes, 0.0);
    CHECK(u0.f.l2_norm() == doctest::Approx(std::sqrt(2.0) * only_pos.l2_norm()).epsilon(1e-3));
    CHECK(u0.f.l2_norm() > f.l2_norm() * 1.01);
    for (std::size_t i = 0; i < 4001; ++i)
        CHECK(u0.f.values[i] == doctest::Approx(u0.f.values[nodes.size() - 1 - i]));

    const SampledFunction neg_only = [&] {
        SampledFunction g = bump_on(nodes, 1.0);
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] > 0)
                g.values[i] = 0.0;
        return g;
    }();
    CHECK(apply_U0(neg_only).f.l2_norm() == 0.0);
    const Reflected un = apply_U(neg_only);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i] > 0)
            CHECK(un.f.values[i] == 0.0);
    CHECK(un.f.l2_norm() == doctest::Approx(neg_only.l2_norm()).epsilon(1e-3));
}

TEST_CASE("product of T operators is bounded by the product of norms")
{
    const GridSpec g = GridSpec::square_grid(0.05, 20.0, 120);
    const ProductBound p = product_bound_check(Density::uniform(), 1.0, 0.5, 0.0, 0.7, g, 0.05, 1.0, 1.0);
    CHECK(p.lhs <= p.factor_norm_1 * p.factor_norm_2 * (1.0 + 1e-9));
    CHECK(p.rhs == doctest::Approx(std::exp(-0.05 * 0.25)));
    CHECK(p.holds == (p.lhs <= p.rhs + p.tolerance));
    CHECK_THROWS_AS(product_bound_check(Density::uniform(), 0.0, 1.0, 0, 0, g, 1, 1, 1), InvalidArgument);
}

TEST_CASE("jacobian oracle on random samples")
{
    KsSpec spec;
    spec.background = [](std::int64_t n) { return 0.3 * std::cos(double(n)); };
    spec.functional = [](std::int64_t n) {
        LinearFunctional f;
        if (n != 0)
            f.coefficients[n > 0 ? n - 1 : n + 1] = 0.5;
        return f;
    };
    for (std::int64_t L : {1, 2, 3}) {
        const JacobianSweep s = jacobian_sweep(spec, L, 20, 9);
        CHECK(s.samples == 20);
        CHECK(s.max_jac_res < 1e-6);
        CHECK(s.max_ratio_res < 1e-9);
        CHECK(s.max_det_gap < 1e-4);
        CHECK(s.max_map_residual < 1e-9);
    }
    const KsSample sample = sample_ks_potential(spec, 2, 4);
    const JacobianReport r = jacobian_oracle(sample.window, 2);
    CHECK(r.x.size() == 4);
    CHECK(r.jac_res < 1e-6);
    double prod = 1.0;
    for (double x : r.x)
        prod *= x;
    CHECK(std::abs(r.det_analytic) == doctest::Approx(1.0 / (r.phi0 * r.phi0)).epsilon(1e-6));
}

TEST_CASE("jacobian oracle rejects degenerate samples")
{
    // Free 3-site chain: the middle eigenvector (E = 0) vanishes at the origin.
    CHECK_THROWS_AS(jacobian_oracle(PotentialWindow::zero(1), 1), NumericalFailure);
    CHECK_THROWS_AS(jacobian_oracle(PotentialWindow::zero(1), 3), OutOfRange);
    CHECK_THROWS_AS(jacobian_oracle(PotentialWindow::zero(7), 0), InvalidArgument);
}

TEST_CASE("factorization integral: normalization, budget and range")
{
    KsSpec spec;
    FactorizationOptions o;
    o.order = 8;
    o.splits = 1;
    o.energy_pieces = 4;
    CHECK(factorization_integral(spec, 1, 0, o, true) == doctest::Approx(1.0).epsilon(5e-3));
    FactorizationOptions tiny = o;
    tiny.max_evaluations = 100;
    CHECK_THROWS_AS(factorization_integral(spec, 1, 1, tiny, true), NumericalFailure);
    CHECK_THROWS_AS(factorization_oracle(spec, 3, 0, o), InvalidArgument);
    CHECK_THROWS_AS(factorization_oracle(spec, 1, 2, o), OutOfRange);
}

TEST_CASE("factorization: Monte Carlo agrees with quadrature at small size")
{
    KsSpec spec;
    FactorizationOptions o;
    o.order = 12;
    o.splits = 2;
    o.energy_pieces = 8;
    o.trials = 20000;
    o.seed = 3;
    const FactorizationReport r = factorization_oracle(spec, 1, 1, o);
    CHECK(std::abs(r.mc_value - r.integral_value) < 5.0 * r.mc_stderr + 2e-3 * r.integral_value);
    // Without a functional the shifts vanish.
    CHECK(r.integral_without_shifts == doctest::Approx(r.integral_value).epsilon(1e-12));
}

#include "kslab/ksoperators.hpp"

#include "kslab/error.hpp"
#include "kslab/localization.hpp"
#include "kslab/numerics.hpp"
#include "kslab/rng.hpp"
#include "kslab/spectra.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kslab {

// ---------------------------------------------------------------- grids

GridSpec GridSpec::square_grid(double eta, double Y, std::size_t cells_per_side)
{
    GridSpec g;
    g.eta = eta;
    g.Y = Y;
    g.y_cells_per_side = cells_per_side;
    g.square = true;
    return g;
}

GridSpec GridSpec::covering(double eta, double Y, std::size_t y_cells_per_side,
                            Interval energies, Interval support, double x_step)
{
    if (!(x_step > 0.0))
        throw InvalidArgument("GridSpec::covering: x_step must be positive");
    GridSpec g;
    g.eta = eta;
    g.Y = Y;
    g.y_cells_per_side = y_cells_per_side;
    g.x_lo = energies.lo - 1.0 / eta - support.hi;
    g.x_hi = energies.hi + 1.0 / eta - support.lo;
    g.x_cells = static_cast<std::size_t>(std::ceil((g.x_hi - g.x_lo) / x_step));
    return g;
}

std::vector<Cell> GridSpec::y_grid() const
{
    if (!(eta > 0.0) || !(Y > eta) || y_cells_per_side == 0)
        throw InvalidArgument("GridSpec: need 0 < eta < Y and at least one cell");
    std::vector<Cell> cells;
    const double h = (Y - eta) / static_cast<double>(y_cells_per_side);
    for (std::size_t i = y_cells_per_side; i-- > 0;) {
        const double hi = eta + static_cast<double>(i + 1) * h;
        const double lo = eta + static_cast<double>(i) * h;
        cells.push_back({-hi, -lo});
    }
    for (std::size_t i = 0; i < y_cells_per_side; ++i)
        cells.push_back({eta + static_cast<double>(i) * h, eta + static_cast<double>(i + 1) * h});
    return cells;
}

std::vector<Cell> GridSpec::x_grid() const
{
    if (square)
        return y_grid();
    if (!(x_hi > x_lo) || x_cells == 0)
        throw InvalidArgument("GridSpec: need x_lo < x_hi and at least one x cell");
    std::vector<Cell> cells(x_cells);
    const double h = (x_hi - x_lo) / static_cast<double>(x_cells);
    for (std::size_t i = 0; i < x_cells; ++i)
        cells[i] = {x_lo + static_cast<double>(i) * h, x_lo + static_cast<double>(i + 1) * h};
    return cells;
}

std::vector<std::string> GridSpec::warnings() const
{
    std::vector<std::string> out;
    if (Y < 1.0 / eta)
        out.push_back("Y is below 1/eta; the y grid misses part of the reciprocal range");
    return out;
}

// ---------------------------------------------------------------- operators

namespace {

OperatorMatrix build_kernel(KernelKind kind, const ScaledDensity& d, double E, const GridSpec& g)
{
    OperatorMatrix M;
    M.kind = kind;
    M.E = E;
    M.scale = d.scale();
    M.x_cells = g.x_grid();
    M.y_cells = g.y_grid();
    if (!(g.y_resolution > 0.0) || g.y_gauss < 1)
        throw InvalidArgument("GridSpec: y_resolution and y_gauss must be positive");

    const auto& xs = M.x_cells;
    const Interval supp = d.support();
    const auto& rule = numerics::gauss_legendre(g.y_gauss);
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> acc(xs.size(), 0.0);
    std::vector<std::size_t> touched;

    for (std::size_t j = 0; j < M.y_cells.size(); ++j) {
        const Cell yc = M.y_cells[j];
        // Split uniformly in t = 1/y so the kernel image moves evenly.
        const double t_a = 1.0 / yc.lo;
        const double t_b = 1.0 / yc.hi;
        const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(t_a - t_b) /
                                                                  g.y_resolution)));
        for (int p = 0; p < pieces; ++p) {
            const double ya = 1.0 / (t_a + (t_b - t_a) * p / pieces);
            const double yb = 1.0 / (t_a + (t_b - t_a) * (p + 1) / pieces);
            const double mid = 0.5 * (ya + yb);
            const double half = 0.5 * (yb - ya);
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double y = mid + half * rule.nodes[q];
                double w = half * rule.weights[q];
                if (kind == KernelKind::T)
                    w /= std::abs(y);
                const double shift = E - 1.0 / y;
                const double img_lo = shift - supp.hi;
                const double img_hi = shift - supp.lo;
                auto it = std::lower_bound(xs.begin(), xs.end(), img_lo,
                                           [](const Cell& c, double v) { return c.hi <= v; });
                for (; it != xs.end() && it->lo < img_hi; ++it) {
                    const double mass = d.cdf(shift - it->lo) - d.cdf(shift - it->hi);
                    if (mass <= 0.0)
                        continue;
                    const auto i = static_cast<std::size_t>(it - xs.begin());
                    if (acc[i] == 0.0)
                        touched.push_back(i);
                    acc[i] += w * mass;
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t i : touched) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), acc[i]);
            acc[i] = 0.0;
        }
        touched.clear();
    }
    M.G.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(M.y_cells.size()));
    M.G.setFromTriplets(triplets.begin(), triplets.end());
    M.G.makeCompressed();
    return M;
}

}  // namespace

OperatorMatrix build_S(const ScaledDensity& d, double E, const GridSpec& g)
{
    return build_kernel(KernelKind::S, d, E, g);
}

OperatorMatrix build_T(const ScaledDensity& d, double E, const GridSpec& g)
{
    return build_kernel(KernelKind::T, d, E, g);
}

double OperatorMatrix::average(Eigen::Index i, Eigen::Index j) const
{
    return G.coeff(i, j) / (x_cells[static_cast<std::size_t>(i)].width() *
                            y_cells[static_cast<std::size_t>(j)].width());
}

std::vector<double> OperatorMatrix::column_sums() const
{
    std::vector<double> sums(y_cells.size(), 0.0);
    for (Eigen::Index j = 0; j < G.outerSize(); ++j) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(G, j); it; ++it)
            s += std::abs(it.value());
        sums[static_cast<std::size_t>(j)] = s / y_cells[static_cast<std::size_t>(j)].width();
    }
    return sums;
}

Eigen::SparseMatrix<double> OperatorMatrix::orthonormal() const
{
    Eigen::SparseMatrix<double> M = G;
    for (Eigen::Index j = 0; j < M.outerSize(); ++j) {
        const double uj = y_cells[static_cast<std::size_t>(j)].width();
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, j); it; ++it) {
            const double wi = x_cells[static_cast<std::size_t>(it.row())].width();
            it.valueRef() /= std::sqrt(wi * uj);
        }
    }
    return M;
}

double OperatorMatrix::max_average() const
{
    double best = 0.0;
    for (Eigen::Index j = 0; j < G.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(G, j); it; ++it)
            best = std::max(best, std::abs(it.value()) /
                                      (x_cells[static_cast<std::size_t>(it.row())].width() *
                                       y_cells[static_cast<std::size_t>(j)].width()));
    return best;
}

double lanczos_norm(const Eigen::SparseMatrix<double>& A, double rel_tol, int max_steps)
{
    const Eigen::Index n = A.cols();
    if (n == 0 || A.nonZeros() == 0)
        return 0.0;
    rng::Stream start(0x1a2c05);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = 1.0 + 0.1 * start.uniform();
    v.normalize();

    std::vector<Eigen::VectorXd> basis{v};
    std::vector<double> alpha, beta;
    double theta_prev = 0.0;
    int stable = 0;
    const int steps = static_cast<int>(std::min<Eigen::Index>(max_steps, n));
    for (int k = 0; k < steps; ++k) {
        Eigen::VectorXd w = A.transpose() * (A * basis.back());
        const double a = basis.back().dot(w);
        alpha.push_back(a);
        // Full reorthogonalisation, twice.
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis)
                w -= b.dot(w) * b;
        const double b = w.norm();

        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), alpha.size());
        Eigen::VectorXd sub(alpha.size() > 1 ? alpha.size() - 1 : 0);
        for (std::size_t i = 0; i + 1 < alpha.size(); ++i)
            sub[static_cast<Eigen::Index>(i)] = beta[i];
        double theta = diag[0];
        if (alpha.size() > 1) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
            es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
            theta = es.eigenvalues().maxCoeff();
        }
        if (b <= 1e-14 * std::max(1.0, theta))
            return std::sqrt(std::max(theta, 0.0));
        if (k > 0 && std::abs(theta - theta_prev) <= rel_tol * theta) {
            if (++stable >= 3)
                return std::sqrt(theta);
        } else {
            stable = 0;
        }
        theta_prev = theta;
        beta.push_back(b);
        basis.push_back(w / b);
    }
    if (steps == n)
        return std::sqrt(std::max(theta_prev, 0.0));
    throw NumericalFailure("lanczos_norm: no convergence in " + std::to_string(max_steps) +
                           " steps");
}

double power_norm(const Eigen::SparseMatrix<double>& A, double rel_tol, int max_steps)
{
    const Eigen::Index n = A.cols();
    if (n == 0 || A.nonZeros() == 0)
        return 0.0;
    rng::Stream start(0x90e1);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = 1.0 + 0.1 * start.uniform();
    v.normalize();
    double lambda = 0.0;
    for (int step = 0; step < max_steps; ++step) {
        Eigen::VectorXd w = A.transpose() * (A * v);
        const double next = w.norm();
        if (next == 0.0)
            return 0.0;
        v = w / next;
        if (step > 0 && std::abs(next - lambda) <= rel_tol * next)
            return std::sqrt(next);
        lambda = next;
    }
    throw NumericalFailure("power_norm: no convergence in " + std::to_string(max_steps) +
                           " steps");
}

double op_norm(const OperatorMatrix& M, int p, int q)
{
    if (p == 1 && q == 1) {
        const auto sums = M.column_sums();
        return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
    }
    if (p == 1 && q == 2) {
        double best = 0.0;
        for (Eigen::Index j = 0; j < M.G.outerSize(); ++j) {
            double s = 0.0;
            for (Eigen::SparseMatrix<double>::InnerIterator it(M.G, j); it; ++it)
                s += it.value() * it.value() /
                     M.x_cells[static_cast<std::size_t>(it.row())].width();
            best = std::max(best, std::sqrt(s) / M.y_cells[static_cast<std::size_t>(j)].width());
        }
        return best;
    }
    if (p == 2 && q == 2)
        return lanczos_norm(M.orthonormal());
    throw InvalidArgument("op_norm: (p, q) must be (1,1), (1,2) or (2,2)");
}

// ---------------------------------------------------------------- U maps

double SampledFunction::operator()(double x) const
{
    if (nodes.empty() || x < nodes.front() || x > nodes.back())
        return 0.0;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    if (it == nodes.end())
        return values.back();
    const auto i = static_cast<std::size_t>(it - nodes.begin());
    if (i == 0)
        return values.front();
    if (x == nodes[i - 1])
        return values[i - 1];
    // The gap between the last negative and first positive node is unsampled.
    if (nodes[i - 1] < 0.0 && nodes[i] > 0.0)
        return 0.0;
    const double t = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
    return values[i - 1] + t * (values[i] - values[i - 1]);
}

double SampledFunction::l2_norm() const
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if ((nodes[i] < 0.0) != (nodes[i + 1] < 0.0))
            continue;
        const double h = nodes[i + 1] - nodes[i];
        s += 0.5 * h * (values[i] * values[i] + values[i + 1] * values[i + 1]);
    }
    return std::sqrt(s);
}

std::vector<double> reciprocal_nodes(double eta, std::size_t per_side)
{
    if (!(eta > 0.0 && eta < 1.0) || per_side < 2)
        throw InvalidArgument("reciprocal_nodes: need 0 < eta < 1 and two nodes per side");
    const auto pos = numerics::log_grid(eta, 1.0 / eta, per_side);
    std::vector<double> nodes;
    for (std::size_t i = pos.size(); i-- > 0;)
        nodes.push_back(-pos[i]);
    nodes.insert(nodes.end(), pos.begin(), pos.end());
    return nodes;
}

namespace {

Reflected reflect(const SampledFunction& f, bool absolute)
{
    Reflected out;
    out.f.nodes = f.nodes;
    out.f.values.resize(f.nodes.size());
    if (f.nodes.empty())
        return out;
    const double lo = f.nodes.front();
    const double hi = f.nodes.back();
    for (std::size_t i = 0; i < f.nodes.size(); ++i) {
        const double x = f.nodes[i];
        if (x == 0.0) {
            out.f.values[i] = 0.0;
            ++out.outside;
            continue;
        }
        const double pre = absolute ? 1.0 / std::abs(x) : 1.0 / x;
        if (pre < lo || pre > hi) {
            out.f.values[i] = 0.0;
            ++out.outside;
            continue;
        }
        out.f.values[i] = f(pre) / std::abs(x);
    }
    return out;
}

}  // namespace

Reflected apply_U0(const SampledFunction& f)
{
    return reflect(f, true);
}

Reflected apply_U(const SampledFunction& f)
{
    return reflect(f, false);
}

ProductBound product_bound_check(const Density& r, double a1, double a2, double E1, double E2,
                                 const GridSpec& square_grid, double c, double K0, double lambda,
                                 double tolerance)
{
    if (!(a1 > 0.0) || !(a2 > 0.0) || !(c > 0.0) || !(K0 > 0.0) || !(lambda > 0.0))
        throw InvalidArgument("product_bound_check: parameters must be positive");
    GridSpec g = square_grid;
    g.square = true;
    const OperatorMatrix t1 = build_T(rescale(r, a1), E1, g);
    const OperatorMatrix t2 = build_T(rescale(r, a2), E2, g);
    const Eigen::SparseMatrix<double> m1 = t1.orthonormal();
    const Eigen::SparseMatrix<double> m2 = t2.orthonormal();
    const Eigen::SparseMatrix<double> prod = m1 * m2;

    ProductBound out;
    out.tolerance = tolerance;
    out.lhs = lanczos_norm(prod);
    out.factor_norm_1 = lanczos_norm(m1);
    out.factor_norm_2 = lanczos_norm(m2);
    out.rhs = std::exp(-c * K0 * K0 * std::min({a1 * a1, a2 * a2, lambda}));
    out.holds = out.lhs <= out.rhs + tolerance;
    return out;
}

// ---------------------------------------------------------------- Jacobian

namespace {

/// v = A(W): v_n = W_n - L_n(v) in order of increasing |n|.
std::vector<double> unit_triangular_map(const std::vector<double>& W, std::int64_t L,
                                        const std::vector<LinearFunctional>& functionals)
{
    std::vector<double> v(W.size(), 0.0);
    const auto at = [&](std::int64_t s) { return v[static_cast<std::size_t>(s + L)]; };
    for (std::int64_t r = 0; r <= L; ++r) {
        for (std::int64_t n : {-r, r}) {
            const auto i = static_cast<std::size_t>(n + L);
            double shift = 0.0;
            if (!functionals.empty())
                shift = functionals[i].apply(at);
            v[i] = W[i] - shift;
            if (r == 0)
                break;
        }
    }
    return v;
}

/// Variables z = (x_{-L}, ..., x_{-1}, E, x_1, ..., x_L) -> W = F(z).
std::vector<double> forward_map(const std::vector<double>& z, std::int64_t L,
                                const std::vector<double>& chi)
{
    const auto N = static_cast<std::size_t>(2 * L + 1);
    const auto var = [&](std::int64_t n) { return z[static_cast<std::size_t>(n + L)]; };
    const auto inv = [&](std::int64_t n) {
        return (n < -L || n > L) ? 0.0 : 1.0 / var(n);
    };
    const double E = var(0);
    std::vector<double> W(N);
    for (std::int64_t n = -L; n <= L; ++n) {
        const double c = chi.empty() ? 0.0 : chi[static_cast<std::size_t>(n + L)];
        double w;
        if (n < 0)
            w = E - c - inv(n - 1) - var(n);
        else if (n == 0)
            w = E - c - inv(-1) - inv(1);
        else
            w = E - c - inv(n + 1) - var(n);
        W[static_cast<std::size_t>(n + L)] = w;
    }
    return W;
}

Eigen::MatrixXd finite_difference(const std::vector<double>& z, std::int64_t L,
                                  const std::vector<double>& chi,
                                  const std::vector<LinearFunctional>* functionals)
{
    const auto N = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd J(N, N);
    for (Eigen::Index r = 0; r < N; ++r) {
        const double h = 1e-6 * std::max(1.0, std::abs(z[static_cast<std::size_t>(r)]));
        auto zp = z;
        auto zm = z;
        zp[static_cast<std::size_t>(r)] += h;
        zm[static_cast<std::size_t>(r)] -= h;
        auto fp = forward_map(zp, L, chi);
        auto fm = forward_map(zm, L, chi);
        if (functionals) {
            fp = unit_triangular_map(fp, L, *functionals);
            fm = unit_triangular_map(fm, L, *functionals);
        }
        for (Eigen::Index c = 0; c < N; ++c)
            J(r, c) = (fp[static_cast<std::size_t>(c)] - fm[static_cast<std::size_t>(c)]) /
                      (2.0 * h);
    }
    return J;
}

}  // namespace

JacobianReport jacobian_oracle(const PotentialWindow& w, std::size_t k, const PotentialSplit& split)
{
    if (w.first_site > 0 || w.first_site != -w.last_site())
        throw InvalidArgument("jacobian_oracle: window must be [-L, L]");
    const std::int64_t L = w.last_site();
    if (L < 1 || L > 6)
        throw InvalidArgument("jacobian_oracle: L must lie in 1..6");
    const auto N = static_cast<std::size_t>(2 * L + 1);
    if (k >= N)
        throw OutOfRange("jacobian_oracle: eigen-index out of range");
    if (!split.chi.empty() && split.chi.size() != N)
        throw InvalidArgument("jacobian_oracle: chi must cover the window");
    if (!split.functionals.empty() && split.functionals.size() != N)
        throw InvalidArgument("jacobian_oracle: functionals must cover the window");

    const EigenDecomposition e = eigen(build(w));
    const auto phi = e.vector(k);
    for (std::size_t i = 0; i < N; ++i)
        if (std::abs(phi[i]) < 1e-12)
            throw NumericalFailure("degenerate sample: eigenvector vanishes at site " +
                                   std::to_string(static_cast<std::int64_t>(i) - L));
    const auto ph = [&](std::int64_t n) { return phi[static_cast<std::size_t>(n + L)]; };

    JacobianReport rep;
    rep.L = L;
    rep.k = k;
    rep.E = e.eigenvalues[k];
    rep.phi0 = ph(0);

    std::vector<double> z(N);
    for (std::int64_t n = -L; n <= L; ++n) {
        double val;
        if (n < 0)
            val = ph(n + 1) / ph(n);
        else if (n == 0)
            val = rep.E;
        else
            val = ph(n - 1) / ph(n);
        z[static_cast<std::size_t>(n + L)] = val;
        if (n != 0)
            rep.x.push_back(val);
    }

    // Analytic Jacobian: rows are variables, columns the components of F.
    const auto idx = [&](std::int64_t n) { return static_cast<Eigen::Index>(n + L); };
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N),
                                              static_cast<Eigen::Index>(N));
    for (std::int64_t n = -L; n <= L; ++n) {
        const double x = z[static_cast<std::size_t>(n + L)];
        if (n < 0) {
            J(idx(n), idx(n)) = -1.0;
            J(idx(n), idx(n + 1)) = 1.0 / (x * x);
        } else if (n == 0) {
            J.row(idx(0)).setOnes();
        } else {
            J(idx(n), idx(n)) = -1.0;
            J(idx(n), idx(n - 1)) = 1.0 / (x * x);
        }
    }
    rep.det_analytic = J.partialPivLu().determinant();
    rep.jac_res = std::abs(rep.det_analytic * rep.phi0 * rep.phi0 - 1.0);

    const Eigen::MatrixXd Jfd = finite_difference(z, L, split.chi, nullptr);
    rep.det_finite_difference = Jfd.partialPivLu().determinant();
    for (Eigen::Index r = 0; r < J.rows(); ++r)
        for (Eigen::Index c = 0; c < J.cols(); ++c)
            rep.matrix_discrepancy = std::max(
                rep.matrix_discrepancy, std::abs(J(r, c) - Jfd(r, c)) / std::max(1.0, std::abs(J(r, c))));
    const Eigen::MatrixXd Jc = finite_difference(z, L, split.chi, &split.functionals);
    rep.det_composed = Jc.partialPivLu().determinant();

    // x_1^{-1} ... x_n^{-1} against phi(n)/phi(0), both sides.
    double prod_pos = 1.0, prod_neg = 1.0;
    for (std::int64_t n = 1; n <= L; ++n) {
        prod_pos /= z[static_cast<std::size_t>(n + L)];
        prod_neg /= z[static_cast<std::size_t>(-n + L)];
        rep.ratio_res = std::max(rep.ratio_res,
                                 std::abs(std::abs(ph(n) / ph(0)) - std::abs(prod_pos)));
        rep.ratio_res = std::max(rep.ratio_res,
                                 std::abs(std::abs(ph(-n) / ph(0)) - std::abs(prod_neg)));
    }

    // A o F(x, E) reproduces v = A(V - chi).
    std::vector<double> base(N);
    for (std::size_t i = 0; i < N; ++i)
        base[i] = w.values[i] - (split.chi.empty() ? 0.0 : split.chi[i]);
    const auto v_true = unit_triangular_map(base, L, split.functionals);
    const auto v_map = unit_triangular_map(forward_map(z, L, split.chi), L, split.functionals);
    for (std::size_t i = 0; i < N; ++i)
        rep.map_residual = std::max(rep.map_residual, std::abs(v_map[i] - v_true[i]));
    return rep;
}

JacobianSweep jacobian_sweep(const KsSpec& spec, std::int64_t L, std::size_t samples,
                             std::uint64_t seed)
{
    JacobianSweep out;
    const auto N = static_cast<std::size_t>(2 * L + 1);
    PotentialSplit split;
    for (std::int64_t n = -L; n <= L; ++n) {
        split.chi.push_back(spec.background(n));
        split.functionals.push_back(spec.functional ? spec.functional(n) : LinearFunctional{});
    }
    for (std::size_t i = 0; i < samples; ++i) {
        bool done = false;
        for (std::int64_t attempt = 0; attempt < 100 && !done; ++attempt) {
            const std::uint64_t key = rng::derive(seed, {static_cast<std::int64_t>(i), attempt});
            const KsSample s = sample_ks_potential(spec, L, key);
            auto pick = rng::substream(key, {-1});
            const auto k = static_cast<std::size_t>(pick() % N);
            try {
                const JacobianReport r = jacobian_oracle(s.window, k, split);
                out.max_jac_res = std::max(out.max_jac_res, r.jac_res);
                out.max_ratio_res = std::max(out.max_ratio_res, r.ratio_res);
                out.max_matrix_discrepancy =
                    std::max(out.max_matrix_discrepancy, r.matrix_discrepancy);
                out.max_det_gap = std::max(out.max_det_gap,
                                           std::abs(r.det_composed / r.det_analytic - 1.0));
                out.max_map_residual = std::max(out.max_map_residual, r.map_residual);
                done = true;
            } catch (const NumericalFailure&) {
                ++out.resampled;
            }
        }
        if (!done)
            throw NumericalFailure("jacobian_sweep: 100 consecutive degenerate samples");
        ++out.samples;
    }
    return out;
}

// ---------------------------------------------------------------- factorization

namespace {

/// v_j = c + e E + sum_t lin_t x_t + sum_t inv_t / x_t over the x slots.
struct AffineForm {
    double c = 0.0;
    double e = 0.0;
    std::vector<double> lin;
    std::vector<double> inv;
};

class NestedIntegral {
public:
    NestedIntegral(const KsSpec& spec, std::int64_t L, std::int64_t n,
                   const FactorizationOptions& opt, bool with_shifts)
        : L_(L), opt_(opt)
    {
        const std::size_t slots = static_cast<std::size_t>(2 * L);
        const auto N = static_cast<std::size_t>(2 * L + 1);
        chi_.resize(N);
        scaled_.reserve(N);
        supp_.resize(N);
        shift_range_.assign(N, Interval{0.0, 0.0});
        functionals_.resize(N);
        knots_.resize(N);
        for (std::int64_t s = -L; s <= L; ++s) {
            const auto i = site(s);
            chi_[i] = spec.background(s);
            scaled_.push_back(rescale(spec.density, spec.scale(s)));
            supp_[i] = scaled_.back().support();
            knots_[i] = scaled_.back().knots();
            if (with_shifts && spec.functional && s != 0) {
                functionals_[i] = spec.functional(s);
                const std::int64_t as = s < 0 ? -s : s;
                if (functionals_[i].reach() >= as)
                    throw SpecViolation("functional L_" + std::to_string(s) +
                                        " references a non-inner site");
            }
        }
        for (std::int64_t s = -L; s <= L; ++s) {
            Interval r{0.0, 0.0};
            for (const auto& [t, b] : functionals_[site(s)].coefficients) {
                const Interval st = supp_[site(t)];
                r.lo += std::min(b * st.lo, b * st.hi);
                r.hi += std::max(b * st.lo, b * st.hi);
            }
            shift_range_[site(s)] = r;
        }

        // Affine forms, |j| increasing.
        forms_.assign(N, AffineForm{0.0, 0.0, std::vector<double>(slots, 0.0),
                                    std::vector<double>(slots, 0.0)});
        for (std::int64_t r = 0; r <= L; ++r) {
            for (std::int64_t j : {-r, r}) {
                AffineForm& f = forms_[site(j)];
                f.c = -chi_[site(j)];
                f.e = 1.0;
                if (j < 0) {
                    f.lin[slot(j)] -= 1.0;
                    if (j - 1 >= -L)
                        f.inv[slot(j - 1)] -= 1.0;
                } else if (j == 0) {
                    f.inv[slot(-1)] -= 1.0;
                    f.inv[slot(1)] -= 1.0;
                } else {
                    f.lin[slot(j)] -= 1.0;
                    if (j + 1 <= L)
                        f.inv[slot(j + 1)] -= 1.0;
                }
                for (const auto& [t, b] : functionals_[site(j)].coefficients) {
                    const AffineForm& g = forms_[site(t)];
                    f.c -= b * g.c;
                    f.e -= b * g.e;
                    for (std::size_t q = 0; q < slots; ++q) {
                        f.lin[q] -= b * g.lin[q];
                        f.inv[q] -= b * g.inv[q];
                    }
                }
                if (r == 0)
                    break;
            }
        }

        // Integration order: x_L, x_{-L}, ..., x_1, x_{-1}.
        for (std::int64_t r = L; r >= 1; --r) {
            order_.push_back(r);
            order_.push_back(-r);
        }
        std::vector<std::size_t> position(slots);
        for (std::size_t p = 0; p < order_.size(); ++p)
            position[slot(order_[p])] = p;
        kernels_at_.resize(order_.size());
        for (std::int64_t j = -L; j <= L; ++j) {
            const AffineForm& f = forms_[site(j)];
            std::size_t level = 0;
            bool any = false;
            for (std::size_t q = 0; q < slots; ++q) {
                if (f.lin[q] != 0.0 || f.inv[q] != 0.0) {
                    level = any ? std::max(level, position[q]) : position[q];
                    any = true;
                }
            }
            kernels_at_[level].push_back(j);
        }
        weighted_.assign(slots, false);
        if (n > 0)
            for (std::int64_t s = 1; s <= n; ++s)
                weighted_[slot(s)] = true;
        else
            for (std::int64_t s = n; s <= -1; ++s)
                weighted_[slot(s)] = true;

        // Energies: every eigenvalue lies in [min V - 2, max V + 2].
        double vlo = std::numeric_limits<double>::infinity();
        double vhi = -vlo;
        for (std::int64_t s = -L; s <= L; ++s) {
            const auto i = site(s);
            vlo = std::min(vlo, chi_[i] + supp_[i].lo + shift_range_[i].lo);
            vhi = std::max(vhi, chi_[i] + supp_[i].hi + shift_range_[i].hi);
        }
        energies_ = {vlo - 2.0, vhi + 2.0};
    }

    Interval energies() const noexcept { return energies_; }
    double evaluations() const noexcept { return evaluations_; }

    double run()
    {
        const auto& rule = numerics::gauss_legendre(opt_.order);
        const int pieces = std::max(1, opt_.energy_pieces);
        const double h = energies_.width() / pieces;
        std::vector<std::pair<double, double>> nodes;
        for (int p = 0; p < pieces; ++p) {
            const double mid = energies_.lo + (p + 0.5) * h;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q)
                nodes.emplace_back(mid + 0.5 * h * rule.nodes[q], 0.5 * h * rule.weights[q]);
        }
        std::vector<double> values(nodes.size(), 0.0);
        std::vector<double> counts(nodes.size(), 0.0);
        numerics::parallel_for(nodes.size(), opt_.workers, [&](std::size_t i) {
            State st{nodes[i].first, std::vector<double>(order_.size() * 2, 0.0), 0.0};
            values[i] = level(st, 0);
            counts[i] = st.evaluations;
        });
        numerics::CompensatedSum sum;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            sum.add(nodes[i].second * values[i]);
            evaluations_ += counts[i];
        }
        if (evaluations_ > opt_.max_evaluations)
            throw NumericalFailure("factorization quadrature exceeded its evaluation budget; "
                                   "lower the resolution");
        return sum.value();
    }

private:
    struct State {
        double E;
        std::vector<double> x;  // by slot
        double evaluations;
    };

    std::size_t site(std::int64_t s) const { return static_cast<std::size_t>(s + L_); }
    std::size_t slot(std::int64_t s) const
    {
        return static_cast<std::size_t>(s < 0 ? s + L_ : s + L_ - 1);
    }

    /// Part of form f from E and every slot except `skip`.
    double known_part(const AffineForm& f, const State& st, std::size_t skip) const
    {
        double v = f.c + f.e * st.E;
        for (std::size_t q = 0; q < f.lin.size(); ++q) {
            if (q == skip)
                continue;
            if (f.lin[q] != 0.0)
                v += f.lin[q] * st.x[q];
            if (f.inv[q] != 0.0)
                v += f.inv[q] / st.x[q];
        }
        return v;
    }

    double level(State& st, std::size_t p) const
    {
        if (p == order_.size())
            return 1.0;
        if (st.evaluations > opt_.max_evaluations)
            return 0.0;
        const std::int64_t s = order_[p];
        const std::size_t sl = slot(s);
        const auto i = site(s);
        const std::int64_t outer = s + (s < 0 ? -1 : 1);
        const double inv_outer = (outer < -L_ || outer > L_) ? 0.0 : 1.0 / st.x[slot(outer)];
        const double base = st.E - chi_[i] - inv_outer;
        const double lo = base - shift_range_[i].hi - supp_[i].hi;
        const double hi = base - shift_range_[i].lo - supp_[i].lo;

        struct Active {
            std::int64_t j;
            double p0, q, s;
        };
        std::vector<Active> active;
        std::vector<double> cuts{lo, hi};
        if (lo < 0.0 && 0.0 < hi)
            cuts.push_back(0.0);
        for (std::int64_t j : kernels_at_[p]) {
            const AffineForm& f = forms_[site(j)];
            Active a{j, known_part(f, st, sl), f.lin[sl], f.inv[sl]};
            active.push_back(a);
            for (double kappa : knots_[site(j)]) {
                // q x^2 + (p0 - kappa) x + s = 0
                const double A = a.q, B = a.p0 - kappa, C = a.s;
                std::vector<double> roots;
                if (A == 0.0) {
                    if (B != 0.0)
                        roots.push_back(-C / B);
                } else {
                    const double disc = B * B - 4.0 * A * C;
                    if (disc >= 0.0) {
                        const double sq = std::sqrt(disc);
                        const double t = -0.5 * (B + (B >= 0.0 ? sq : -sq));
                        if (t != 0.0) {
                            roots.push_back(t / A);
                            roots.push_back(C / t);
                        } else {
                            roots.push_back(0.0);
                        }
                    }
                }
                for (double r : roots)
                    if (r > lo && r < hi)
                        cuts.push_back(r);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        const auto kernel_product = [&](double x) {
            double prod = 1.0;
            for (const Active& a : active) {
                prod *= scaled_[site(a.j)].evaluate(a.p0 + a.q * x + a.s / x);
                if (prod == 0.0)
                    return 0.0;
            }
            return prod;
        };

        const auto& rule = numerics::gauss_legendre(opt_.order);
        const int splits = std::max(1, opt_.splits);
        double total = 0.0;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = cuts[c], b = cuts[c + 1];
            if (!(b > a))
                continue;
            if (kernel_product(0.5 * (a + b)) == 0.0)
                continue;
            const double h = (b - a) / splits;
            for (int sp = 0; sp < splits; ++sp) {
                const double mid = a + (sp + 0.5) * h;
                for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                    const double x = mid + 0.5 * h * rule.nodes[q];
                    double val = kernel_product(x);
                    if (val == 0.0)
                        continue;
                    if (weighted_[sl])
                        val /= std::abs(x);
                    st.x[sl] = x;
                    if (p + 1 == order_.size())
                        st.evaluations += 1.0;
                    total += 0.5 * h * rule.weights[q] * val * level(st, p + 1);
                }
            }
        }
        return total;
    }

    std::int64_t L_;
    FactorizationOptions opt_;
    std::vector<double> chi_;
    std::vector<ScaledDensity> scaled_;
    std::vector<Interval> supp_;
    std::vector<Interval> shift_range_;
    std::vector<LinearFunctional> functionals_;
    std::vector<std::vector<double>> knots_;
    std::vector<AffineForm> forms_;
    std::vector<std::int64_t> order_;
    std::vector<std::vector<std::int64_t>> kernels_at_;
    std::vector<bool> weighted_;
    Interval energies_;
    double evaluations_ = 0.0;
};

}  // namespace

double factorization_integral(const KsSpec& spec, std::int64_t L, std::int64_t n,
                              const FactorizationOptions& options, bool with_shifts,
                              Interval* energies, double* evaluations)
{
    if (L < 1 || L > 2)
        throw InvalidArgument("factorization_oracle: L must be 1 or 2");
    if (n < -L || n > L)
        throw OutOfRange("factorization_oracle: n outside the window");
    if (options.order < 2)
        throw InvalidArgument("factorization_oracle: quadrature order must be at least 2");
    NestedIntegral integral(spec, L, n, options, with_shifts);
    const double value = integral.run();
    if (energies)
        *energies = integral.energies();
    if (evaluations)
        *evaluations = integral.evaluations();
    return value;
}

FactorizationReport factorization_oracle(const KsSpec& spec, std::int64_t L, std::int64_t n,
                                         const FactorizationOptions& options)
{
    FactorizationReport rep;
    rep.L = L;
    rep.n = n;
    rep.integral_value =
        factorization_integral(spec, L, n, options, true, &rep.energies, &rep.evaluations);
    rep.integral_without_shifts = factorization_integral(spec, L, n, options, false);

    if (options.trials < 2)
        throw InvalidArgument("factorization_oracle: at least two Monte Carlo trials");
    std::vector<double> samples(options.trials);
    numerics::parallel_for(options.trials, options.workers, [&](std::size_t t) {
        const KsSample s = sample_ks_potential(spec, L, trial_key(options.seed, t, 0));
        const EigenDecomposition e = eigen(build(s.window));
        samples[t] = correlator(e, n, 0);
    });
    numerics::CompensatedSum sum;
    for (double v : samples)
        sum.add(v);
    const double count = static_cast<double>(options.trials);
    rep.mc_value = sum.value() / count;
    numerics::CompensatedSum sq;
    for (double v : samples)
        sq.add((v - rep.mc_value) * (v - rep.mc_value));
    rep.mc_stderr = std::sqrt(sq.value() / (count - 1.0) / count);
    rep.rel_err = std::abs(rep.mc_value - rep.integral_value) / std::abs(rep.integral_value);
    return rep;
}

}  // namespace kslab

#pragma once

#include "kslab/distributions.hpp"
#include "kslab/potentials.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace kslab {

/// A cell [lo, hi] of a one-dimensional grid.
struct Cell {
    double lo = 0.0;
    double hi = 0.0;
    double width() const noexcept { return hi - lo; }
};

/// Cell grids for the kernel operators.  The y side is a union of uniform
/// grids on [-Y, -eta] and [eta, Y]; the x side is a uniform grid on
/// [x_lo, x_hi], or the y grid itself for square grids.
struct GridSpec {
    double eta = 1e-3;
    double Y = 1e3;
    std::size_t y_cells_per_side = 2000;
    double x_lo = -1005.0;
    double x_hi = 1005.0;
    std::size_t x_cells = 200000;
    bool square = false;
    /// Fixed number of Gauss points per y sub-cell; y cells are split so that
    /// 1/y moves by at most `y_resolution` within a sub-cell.
    int y_gauss = 4;
    double y_resolution = 0.05;

    /// Square grid: x cells equal y cells.
    static GridSpec square_grid(double eta, double Y, std::size_t cells_per_side);
    /// x range covering E - 1/y - supp for every E in `energies` and y on the grid.
    static GridSpec covering(double eta, double Y, std::size_t y_cells_per_side,
                             Interval energies, Interval support, double x_step);

    std::vector<Cell> y_grid() const;
    std::vector<Cell> x_grid() const;
    /// Human-readable warnings (e.g. Y < 1/eta).
    std::vector<std::string> warnings() const;
};

enum class KernelKind { S, T };

/// G_ij = integral over X_i x Y_j of r_a(E - x - 1/y) m(y), m = 1 (S) or
/// 1/|y| (T).  x-cell integrals are exact CDF differences; the y integral
/// uses Gauss points on sub-cells.  The discrete operator acts on
/// cell-constant functions, so every norm below is that of the
/// cell-projected operator and never exceeds the norm of the exact one
/// beyond quadrature error.
struct OperatorMatrix {
    KernelKind kind = KernelKind::S;
    double E = 0.0;
    double scale = 1.0;
    std::vector<Cell> x_cells;
    std::vector<Cell> y_cells;
    Eigen::SparseMatrix<double> G;  // rows: x cells, cols: y cells

    /// Cell average of the kernel.
    double average(Eigen::Index i, Eigen::Index j) const;
    /// sum_i G_ij / |Y_j|.
    std::vector<double> column_sums() const;
    /// M_ij = G_ij / sqrt(|X_i| |Y_j|): the matrix in orthonormal cell bases.
    Eigen::SparseMatrix<double> orthonormal() const;
    double max_average() const;
};

OperatorMatrix build_S(const ScaledDensity& d, double E, const GridSpec& g);
OperatorMatrix build_T(const ScaledDensity& d, double E, const GridSpec& g);

/// Operator norm ||.||_{p,q} for (p, q) in {(1,1), (1,2), (2,2)}.  The (2,2)
/// norm uses Lanczos on M^T M (relative tolerance 1e-10) and throws
/// NumericalFailure without convergence.
double op_norm(const OperatorMatrix& M, int p, int q);

/// Largest singular value of A by power iteration on A^T A (cross-check).
double power_norm(const Eigen::SparseMatrix<double>& A, double rel_tol = 1e-8,
                  int max_steps = 10000);
/// Largest singular value of A by Lanczos on A^T A.
double lanczos_norm(const Eigen::SparseMatrix<double>& A, double rel_tol = 1e-10,
                    int max_steps = 400);

/// Values on increasing nodes, linearly interpolated in between; zero outside
/// the nodes and across the gap between opposite-sign neighbours.
struct SampledFunction {
    std::vector<double> nodes;
    std::vector<double> values;

    double operator()(double x) const;
    /// Trapezoid L^2 norm on the nodes (each sign side separately).
    double l2_norm() const;
};

/// Symmetric node set: log-spaced points on [eta, 1/eta] and their negatives;
/// closed under y -> 1/y and y -> -y.
std::vector<double> reciprocal_nodes(double eta, std::size_t per_side);

struct Reflected {
    SampledFunction f;
    /// Nodes whose preimage fell outside the sampled range (value set to 0).
    std::size_t outside = 0;
};

/// (U0 f)(x) = |x|^{-1} f(1/|x|).
Reflected apply_U0(const SampledFunction& f);
/// (U f)(x) = |x|^{-1} f(1/x), unitary on L^2(R).
Reflected apply_U(const SampledFunction& f);

struct ProductBound {
    double lhs = 0.0;  // ||T_{E1} T_{E2}||_{2,2} on a common square grid
    double rhs = 0.0;  // exp(-c K0^2 min(a1^2, a2^2, lambda))
    bool holds = false;
    double tolerance = 1e-3;
    double factor_norm_1 = 0.0;
    double factor_norm_2 = 0.0;
};

ProductBound product_bound_check(const Density& r, double a1, double a2, double E1, double E2,
                                 const GridSpec& square_grid, double c, double K0, double lambda,
                                 double tolerance = 1e-3);

/// Change-of-variables data of one eigenvector on [-L, L].
struct JacobianReport {
    std::int64_t L = 0;
    std::size_t k = 0;
    double E = 0.0;
    double phi0 = 0.0;
    /// x_n for n = -L..-1, 1..L (site order, 0 skipped).
    std::vector<double> x;
    double det_analytic = 0.0;
    double det_finite_difference = 0.0;
    /// det of the composed map A o F by finite differences.
    double det_composed = 0.0;
    double jac_res = 0.0;        // |det J phi(0)^2 - 1|
    double ratio_res = 0.0;      // max_n | |phi(n)/phi(0)| - |prod x^{-1}| |
    double matrix_discrepancy = 0.0;  // max relative entry gap, analytic vs FD
    double map_residual = 0.0;   // max |A o F(x, E) - v|
};

/// Frozen parts of V = v + chi + L(v) used by the composed map; defaults to
/// chi = 0, L = 0, so that v = V.
struct PotentialSplit {
    std::vector<double> chi;                       // site order, or empty
    std::vector<LinearFunctional> functionals;     // site order, or empty
};

/// Throws NumericalFailure ("degenerate sample") when |phi(n)| < 1e-12 at any
/// site, since the x variables are then undefined.
JacobianReport jacobian_oracle(const PotentialWindow& w, std::size_t k,
                               const PotentialSplit& split = {});

struct JacobianSweep {
    double max_jac_res = 0.0;
    double max_ratio_res = 0.0;
    double max_matrix_discrepancy = 0.0;
    double max_det_gap = 0.0;  // |det_composed / det_analytic - 1|
    double max_map_residual = 0.0;
    std::size_t samples = 0;
    std::size_t resampled = 0;
};

/// `samples` random KS draws on [-L, L] with a random eigen-index each,
/// degenerate draws replaced from the next substream.
JacobianSweep jacobian_sweep(const KsSpec& spec, std::int64_t L, std::size_t samples,
                             std::uint64_t seed);

struct FactorizationOptions {
    std::size_t trials = 1000000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    /// Gauss-Legendre points per piece and equal splits per piece.
    int order = 16;
    int splits = 2;
    /// Equal pieces of the energy range.
    int energy_pieces = 16;
    /// Abort once this many innermost integrand evaluations were used.
    double max_evaluations = 5e9;
};

struct FactorizationReport {
    std::int64_t L = 0;
    std::int64_t n = 0;
    double mc_value = 0.0;
    double mc_stderr = 0.0;
    /// Nested quadrature of the changed-variables integral, kernels evaluated
    /// at the v recovered through the unit-determinant map.
    double integral_value = 0.0;
    /// Same quadrature with the functional shifts dropped from the kernels.
    double integral_without_shifts = 0.0;
    double rel_err = 0.0;  // |mc - integral| / |integral|
    Interval energies;
    double evaluations = 0.0;
};

/// rho_L(n, 0; chi) two ways.  L in {1, 2}, 0 <= |n| <= L.
FactorizationReport factorization_oracle(const KsSpec& spec, std::int64_t L, std::int64_t n,
                                         const FactorizationOptions& options);

/// Only the quadrature side; `with_shifts` selects the kernel arguments.
double factorization_integral(const KsSpec& spec, std::int64_t L, std::int64_t n,
                              const FactorizationOptions& options, bool with_shifts,
                              Interval* energies = nullptr, double* evaluations = nullptr);

}  // namespace kslab

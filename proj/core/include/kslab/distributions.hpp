#pragma once

#include "kslab/rng.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kslab {

/// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// A compactly supported, bounded single-site probability density r.
///
/// Two kinds exist: the uniform density on [0, 1] and a tabulated density,
/// piecewise linear between (abscissa, value) nodes and zero outside the
/// table.  Tabulated densities must integrate to 1 (trapezoid rule) within
/// 1e-9; the table is not renormalised.
///
/// Fourier convention: r^(k) = \int e^{ikx} r(x) dx.  Only |r^|^2 is ever
/// used, so the sign of the phase is immaterial.
class Density {
public:
    enum class Kind { uniform, tabulated };

    static Density uniform();
    /// Throws InvalidArgument for non-increasing abscissae, negative values,
    /// fewer than two nodes, or normalisation drift above 1e-9.
    static Density tabulated(std::vector<std::pair<double, double>> table);
    /// Two-column plain-text file; '#' starts a comment.
    static Density load(const std::filesystem::path& path);

    Kind kind() const noexcept { return kind_; }
    Interval support() const noexcept { return support_; }
    /// ||r||_inf.
    double sup_bound() const noexcept { return sup_bound_; }

    double evaluate(double x) const noexcept;
    double cdf(double x) const noexcept;
    /// Inverse CDF; exact for the uniform kind, exact on the piecewise
    /// quadratic trapezoid CDF for the tabulated kind.
    double quantile(double u) const noexcept;
    double sample(rng::Stream& stream) const noexcept { return quantile(stream.uniform()); }

    /// |r^(k)|^2; closed form for uniform, segment-wise Gauss-Legendre for
    /// tabulated.
    double fourier_sq(double k) const;

    /// Breakpoints of the density (points where it may fail to be smooth).
    std::vector<double> knots() const;

    std::string describe() const;

    std::span<const std::pair<double, double>> table() const noexcept;

private:
    struct Table {
        std::vector<std::pair<double, double>> nodes;
        std::vector<double> cumulative;  // trapezoid CDF at each node
    };

    Kind kind_ = Kind::uniform;
    Interval support_{0.0, 1.0};
    double sup_bound_ = 1.0;
    std::shared_ptr<const Table> table_;
};

/// r_a(x) = a^{-1} r(x / a).
class ScaledDensity {
public:
    ScaledDensity(Density base, double scale);

    const Density& base() const noexcept { return base_; }
    double scale() const noexcept { return scale_; }

    Interval support() const noexcept
    {
        const Interval s = base_.support();
        return {scale_ * s.lo, scale_ * s.hi};
    }
    double sup_bound() const noexcept { return base_.sup_bound() / scale_; }

    double evaluate(double x) const noexcept { return base_.evaluate(x / scale_) / scale_; }
    double cdf(double x) const noexcept { return base_.cdf(x / scale_); }
    double quantile(double u) const noexcept { return scale_ * base_.quantile(u); }
    double sample(rng::Stream& stream) const noexcept { return quantile(stream.uniform()); }
    double fourier_sq(double k) const { return base_.fourier_sq(scale_ * k); }
    std::vector<double> knots() const;

private:
    Density base_;
    double scale_;
};

/// Throws InvalidArgument when a <= 0 (or not finite).
ScaledDensity rescale(const Density& d, double a);

/// Largest c such that sup_{lambda' <= |k| <= k_max} |r^(k)|^2 <= exp(-c lambda'^2)
/// holds at every point lambda' of a log-spaced grid on [lambda, k_max].
struct DecayConstant {
    double c = 0.0;
    double lambda = 0.0;
    double k_max = 0.0;
    std::size_t grid_points = 0;
    /// Ratio between consecutive grid points.
    double grid_ratio = 0.0;
    /// Grid point at which the minimum over lambda' is attained.
    double binding_lambda = 0.0;
};

/// Throws InvalidArgument unless 0 < lambda < k_max, NumericalFailure when no
/// positive c exists on the grid.
DecayConstant decay_constant(const Density& d, double lambda, double k_max,
                             std::size_t grid_points = 10000);

/// Replays the decay-constant inequality on the same grid; true when it holds.
bool decay_constant_holds(const Density& d, const DecayConstant& dc);

}  // namespace kslab

#pragma once

#include "kslab/distributions.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace kslab {

struct PotentialWindow;

/// Dirichlet restriction of psi(n+1) + psi(n-1) + V(n) psi(n) to the sites
/// first_site .. first_site + size() - 1.  Off-diagonal entries are all 1.
class TridiagonalOperator {
public:
    TridiagonalOperator(std::vector<double> diag, std::int64_t first_site);

    std::size_t size() const noexcept { return diag_.size(); }
    std::int64_t first_site() const noexcept { return first_site_; }
    std::int64_t last_site() const noexcept
    {
        return first_site_ + static_cast<std::int64_t>(diag_.size()) - 1;
    }
    std::span<const double> diag() const noexcept { return diag_; }
    double potential_sup() const noexcept { return potential_sup_; }
    /// [-2 - ||V||_inf, 2 + ||V||_inf], which contains the spectrum.
    Interval sigma0() const noexcept { return {-2.0 - potential_sup_, 2.0 + potential_sup_}; }

    void apply(std::span<const double> x, std::span<double> y) const;

private:
    std::vector<double> diag_;
    std::int64_t first_site_;
    double potential_sup_ = 0.0;
};

TridiagonalOperator build(const PotentialWindow& w);

/// Full spectral data of a TridiagonalOperator.
struct EigenDecomposition {
    std::size_t n = 0;
    std::int64_t first_site = 0;
    /// Ascending eigenvalues.
    std::vector<double> eigenvalues;
    /// Column-major: vectors[k * n + i] is phi^k at site first_site + i.
    std::vector<double> vectors;
    /// Achieved max_k ||H phi^k - E^k phi^k||_inf.
    double residual = 0.0;
    /// Residual ceiling 1e-10 (1 + ||V||_inf).
    double residual_tolerance = 0.0;
    /// Number of vectors that were re-orthogonalised inside a cluster.
    std::size_t reorthogonalized = 0;

    std::span<const double> vector(std::size_t k) const
    {
        return {vectors.data() + k * n, n};
    }
    std::size_t index_of(std::int64_t site) const;
    double phi(std::size_t k, std::int64_t site) const { return vectors[k * n + index_of(site)]; }
};

/// Sturm-sequence bisection for every eigenvalue, inverse iteration for the
/// eigenvectors, with modified Gram-Schmidt inside clusters of close
/// eigenvalues.  Throws NumericalFailure if the residual ceiling is missed.
EigenDecomposition eigen(const TridiagonalOperator& op);

/// Number of eigenvalues strictly below x.
std::size_t sturm_count(std::span<const double> diag, double x);

/// <delta_n, e^{-itH} delta_m> = sum_k e^{-itE^k} phi^k(n) phi^k(m).
std::complex<double> amplitude(const EigenDecomposition& e, std::int64_t n, std::int64_t m,
                               double t);

/// sum_k |phi^k(n)| |phi^k(m)|.
double correlator(const EigenDecomposition& e, std::int64_t n, std::int64_t m);

/// correlator(e, n, m) for every site n of the window, in site order.
std::vector<double> correlator_row(const EigenDecomposition& e, std::int64_t m);

struct OrthonormalityReport {
    double max_norm_error = 0.0;  // max_k | ||phi^k||_2 - 1 |
    double max_overlap = 0.0;     // max_{k != l} |<phi^k, phi^l>|
    bool strictly_ordered = true;
};

OrthonormalityReport check_orthonormality(const EigenDecomposition& e);

/// CSV `k,E`.
void write_spectrum_csv(const EigenDecomposition& e, const std::filesystem::path& path);

}  // namespace kslab

#pragma once

#include "kslab/potentials.hpp"
#include "kslab/spectra.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kslab {

/// Draws one potential window on [-L, L] from a substream key.
using WindowSampler = std::function<PotentialWindow(std::uint64_t key)>;

/// Sampler for the i.i.d. case V(n) = a xi_n, xi_n ~ r.
WindowSampler iid_sampler(const Density& r, double a, std::int64_t L);
/// Sampler that draws a fresh KS potential per trial.
WindowSampler ks_sampler(KsSpec spec, std::int64_t L);

struct MonteCarloOptions {
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    /// Replacement draws allowed per trial after an eigensolver failure.
    std::size_t max_retries = 3;
};

/// Key of attempt `attempt` of trial `trial`; attempt 0 is derive(seed, {trial}).
std::uint64_t trial_key(std::uint64_t seed, std::size_t trial, std::size_t attempt);

struct DecayRow {
    std::int64_t n = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t trials = 0;
    std::optional<double> theoretical_bound;
};

struct DecayProfile {
    std::int64_t L = 0;
    std::int64_t m = 0;
    std::vector<DecayRow> rows;
    std::string spec_digest;
    std::uint64_t seed = 0;
    /// Trials whose first draw failed in the eigensolver; each was replaced
    /// by a draw from a perturbed substream and is reported here.
    std::size_t failures = 0;

    const DecayRow& row(std::int64_t n) const;
    /// CSV `n,mean,stderr,trials[,theoretical_bound]`.
    void write_csv(const std::filesystem::path& path) const;
};

/// Monte Carlo estimate of rho_L(n, m) for every n in [-L, L].  Trials are
/// independent of the worker count; the reduction runs in trial order with
/// compensated sums.
DecayProfile rho_estimate(const WindowSampler& sampler, std::int64_t L, std::int64_t m,
                          const MonteCarloOptions& options);

struct DynamicalReport {
    /// max over trials, (n, m) and t of |amplitude| - correlator.
    double max_violation = -std::numeric_limits<double>::infinity();
    std::vector<double> per_trial;
    std::size_t worst_trial = 0;
    std::int64_t worst_n = 0;
    std::int64_t worst_m = 0;
    double worst_t = 0.0;
    /// True when the t grid was empty and nothing was checked.
    bool vacuous = false;
    std::size_t failures = 0;
};

/// Checks |<delta_n, e^{-itH} delta_m>| <= sum_k |phi^k(n)||phi^k(m)| per trial.
DynamicalReport dynamical_check(const WindowSampler& sampler, std::int64_t L,
                                const std::vector<double>& t_grid,
                                const MonteCarloOptions& options);

/// max over (n, m, t) of |amplitude| - correlator for one decomposition.
double dynamical_violation(const EigenDecomposition& e, const std::vector<double>& t_grid,
                           std::int64_t* worst_n = nullptr, std::int64_t* worst_m = nullptr,
                           double* worst_t = nullptr);

/// t = 0, step, ..., t_max.
std::vector<double> time_grid(double t_max, double step);

struct RateFit {
    double rate = 0.0;        // minus the slope of log(mean) against |n - m|
    double intercept = 0.0;
    double r_squared = 0.0;
    double rate_stderr = 0.0;
    double ci_low = 0.0;      // 95% interval for the rate (t distribution)
    double ci_high = 0.0;
    std::size_t points = 0;
};

/// Least squares of log(mean) against |n - m| over rows with n_lo <= n <= n_hi.
/// Throws InvalidArgument when a mean in range is not positive.
RateFit fit_rate(const DecayProfile& p, std::int64_t n_lo, std::int64_t n_hi);

struct BoundParams {
    double leb_sigma0 = 0.0;
    double r_sup = 1.0;
    double c = 0.0;
    double K0 = 1.0;
    double lambda = 0.0;
    /// a_s; for the hierarchical variant use hierarchical_scale.
    std::function<double(std::int64_t)> scale;
};

/// Leb(Sigma_0) a_n^{-1/2} ||r||^{1/2} exp(-c K0^2 sum_{j=1}^{k} min{a_{2j}^2, a_{2j-1}^2, lambda})
/// a_0^{-1/2} ||r||^{1/2}, k = floor((|n| - 1) / 2), sites taken on the side of n.
double theoretical_bound(const BoundParams& p, std::int64_t n);
double log_theoretical_bound(const BoundParams& p, std::int64_t n);

/// s -> eps_{|m(s)|}, which turns theoretical_bound into the hierarchical bound.
std::function<double(std::int64_t)> hierarchical_scale(const Partition& part,
                                                       std::vector<double> level_eps);

}  // namespace kslab

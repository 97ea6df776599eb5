#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kslab::cli {

/// Outcome of one verification check.  `value` is the worst observed
/// residual (or margin) and passes when it does not exceed `threshold`.
struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    double seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> details;
};

struct VerifySettings {
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    // eigensolver: free Laplacian sizes
    std::vector<std::int64_t> eigensolver_sizes{3, 10, 101, 501};
    // correlator normalization
    std::size_t correlator_instances = 100;
    std::int64_t correlator_max_L = 100;
    // Jacobian identity
    std::vector<std::int64_t> jacobian_L{1, 2, 3};
    std::size_t jacobian_samples = 100;
    /// Test hook: flips the sign of the 1/x^2 entries of the Jacobian.
    bool wrong_sign_kernel = false;
    // factorization oracle
    std::size_t factorization_trials = 1000000;
    bool factorization_quick = false;
    // operator norms
    std::size_t norm_energies = 11;
    std::vector<double> norm_scales{1.0, 0.3, 0.1};
    // dynamical bound
    std::int64_t dynamical_L = 30;
    std::size_t dynamical_trials = 100;
    double dynamical_t_max = 100.0;
    double dynamical_t_step = 0.1;
    // gap bound
    std::size_t gap_k_max = 12;
    // Hoelder bound
    std::size_t holder_pairs = 10000;
    double holder_gamma = 0.3;
    double holder_gammatilde = 0.4;
    std::int64_t holder_terms = 2000;
    // limit-periodic construction
    double lp_eps = 0.1;
    double lp_gamma = 1000.0;
    std::size_t lp_levels = 2;
};

/// Every check name, in run order.
const std::vector<std::string>& check_names();
/// Runs one named check; throws InvalidArgument for an unknown name.
CheckResult run_check(const std::string& name, const VerifySettings& s);

CheckResult check_eigensolver(const VerifySettings& s);
CheckResult check_correlator(const VerifySettings& s);
CheckResult check_jacobian(const VerifySettings& s);
CheckResult check_factorization(const VerifySettings& s);
CheckResult check_norms(const VerifySettings& s);
CheckResult check_dynamical(const VerifySettings& s);
CheckResult check_limit_periodic(const VerifySettings& s);
CheckResult check_gap(const VerifySettings& s);
CheckResult check_holder(const VerifySettings& s);
CheckResult check_summability(const VerifySettings& s);

}  // namespace kslab::cli

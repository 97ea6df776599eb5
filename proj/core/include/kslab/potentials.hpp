#pragma once

#include "kslab/diophantine.hpp"
#include "kslab/distributions.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kslab {

/// L(xi) = sum_i b_i xi_{s_i}; coefficients keyed by site.
struct LinearFunctional {
    std::map<std::int64_t, double> coefficients;

    bool empty() const noexcept { return coefficients.empty(); }
    /// ||L||_+ = sum |b_i|.
    double plus_norm() const noexcept;
    /// Largest |s| referenced (-1 when empty).
    std::int64_t reach() const noexcept;
    double apply(const std::function<double(std::int64_t)>& xi) const;
};

/// Sampled potential on the consecutive sites first_site .. last_site().
struct PotentialWindow {
    std::int64_t first_site = 0;
    std::vector<double> values;
    std::string construction;
    /// Construction parameters, in insertion order, already formatted.
    std::vector<std::pair<std::string, std::string>> parameters;
    std::uint64_t seed = 0;
    /// A priori bound on |V(n)| implied by the construction.
    double declared_bound = std::numeric_limits<double>::infinity();

    std::size_t size() const noexcept { return values.size(); }
    std::int64_t last_site() const noexcept
    {
        return first_site + static_cast<std::int64_t>(values.size()) - 1;
    }
    bool contains(std::int64_t n) const noexcept { return n >= first_site && n <= last_site(); }
    double at(std::int64_t n) const;
    double sup_norm() const noexcept;

    /// CSV `n,V`.
    void write_csv(const std::filesystem::path& path) const;
    /// Reads `n,V`; sites must be consecutive.
    static PotentialWindow read_csv(const std::filesystem::path& path);

    static PotentialWindow zero(std::int64_t L);
};

/// V(n) = xi_n + chi_n + L_n(xi_{-|n|+1}, ..., xi_{|n|-1}), xi_n ~ r_{a_n}.
struct KsSpec {
    Density density = Density::uniform();
    std::function<double(std::int64_t)> scale = [](std::int64_t) { return 1.0; };
    std::function<double(std::int64_t)> background = [](std::int64_t) { return 0.0; };
    /// Empty result means L_n = 0.
    std::function<LinearFunctional(std::int64_t)> functional;
    /// Uniform bound B on ||L_n||_+.
    double plus_bound = std::numeric_limits<double>::infinity();
};

struct KsSample {
    PotentialWindow window;
    /// xi_n in site order, same indexing as window.values.
    std::vector<double> xi;
    /// L_n term in site order.
    std::vector<double> functional_term;
};

/// Throws SpecViolation when L_n references xi_s with |s| >= |n|, when
/// ||L_n||_+ exceeds the bound, or when a_n is not positive.
KsSample sample_ks_potential(const KsSpec& spec, std::int64_t L, std::uint64_t seed);

/// Breakpoints l_m for m = m_first .. m_first + l.size() - 1; the sites
/// covered are l_{m_first} + 1 .. l_last and I_m = (l_{m-1}, l_m].
class Partition {
public:
    Partition(std::int64_t m_first, std::vector<std::int64_t> breakpoints);

    /// l_{-1} = -n_0 - 1, l_0 = n_0, l_m = n_m, l_{-m-1} = -n_m - 1.
    static Partition symmetric(const std::vector<std::int64_t>& n_levels);

    std::int64_t m_first() const noexcept { return m_first_; }
    std::int64_t m_last() const noexcept
    {
        return m_first_ + static_cast<std::int64_t>(l_.size()) - 1;
    }
    std::int64_t breakpoint(std::int64_t m) const;
    std::int64_t first_covered() const noexcept { return l_.front() + 1; }
    std::int64_t last_covered() const noexcept { return l_.back(); }

    /// The unique m with n in (l_{m-1}, l_m]; OutOfRange outside the covered
    /// sites.
    std::int64_t m_of(std::int64_t n) const;

private:
    std::int64_t m_first_;
    std::vector<std::int64_t> l_;
};

/// V(n) = sum_{|m(n)| <= k <= K} xi_{n,k} + chi_n + sum_{k < |m(n)|} L_{n,k}(...),
/// xi_{n,k} ~ r_{eps_k}, truncated at depth K = level_eps.size() - 1.
struct HierSpec {
    Partition partition{-1, {-1, 0}};
    Density density = Density::uniform();
    std::vector<double> level_eps;
    /// Declared sum_{k > K} eps_k.
    double tail_bound = 0.0;
    /// Fail when tail_bound exceeds this.
    double tail_tolerance = std::numeric_limits<double>::infinity();
    /// L_{n,k}: coefficients on xi_{s,k}.  Only called for k < |m(n)|.
    std::function<LinearFunctional(std::int64_t, std::size_t)> functional;
    std::function<double(std::int64_t)> background = [](std::int64_t) { return 0.0; };
    double plus_bound = std::numeric_limits<double>::infinity();
};

struct HierSample {
    PotentialWindow window;
    /// Draw xi_{n,k}; deterministic in (seed, n, k).
    std::function<double(std::int64_t, std::size_t)> draw;
    double tail_bound = 0.0;
};

/// Throws SpecViolation on truncation or functional violations and
/// OutOfRange when the partition does not cover [-L, L] to depth K.
HierSample sample_hier_potential(const HierSpec& spec, std::int64_t L, std::uint64_t seed);

struct Sequences {
    double eps = 0.0;
    double gamma = 0.0;
    std::vector<double> level_eps;           // eps_k, k = 0..K
    std::vector<std::int64_t> n_levels;      // n_k, k = 0..K
    /// sum_{k > K} eps_k in closed form.
    double tail_after(std::size_t K) const;
};

/// eps_k = eps 2^{-(k+2)}.
double default_level_eps(double eps, std::size_t k);

/// eps_k^{-5/2} exp(-gamma n eps_k^2) < 2^{-k}, evaluated in log form.
bool sequence_condition(double eps_k, double gamma, std::int64_t n, std::size_t k);

/// Raised when n_k would pass the integer cap; carries the levels built so far.
class CapError : public SpecViolation {
public:
    CapError(const std::string& what, Sequences partial)
        : SpecViolation(what), partial_(std::move(partial))
    {
    }
    const Sequences& partial() const noexcept { return partial_; }

private:
    Sequences partial_;
};

inline constexpr std::int64_t kDefaultLevelCap = std::int64_t{1} << 62;

/// Levels k = 0..K with eps_k = eps 2^{-(k+2)}, n_0 the least positive n with
/// sequence_condition(eps_1, gamma, n, 1), and 2n_k + 1 the least multiple
/// (quotient odd, >= 3) of 2n_{k-1} + 1 with
/// sequence_condition(eps_{k+1}, gamma, n_k, k + 1).
Sequences gen_sequences(double eps, double gamma, std::size_t K,
                        std::int64_t cap = kDefaultLevelCap);

struct Approximant {
    std::size_t level = 0;
    std::int64_t period = 0;
    PotentialWindow window;
};

struct LimitPeriodicResult {
    /// Background plus the limit-periodic perturbation.
    PotentialWindow window;
    /// Perturbation alone, truncated at the sampling depth.
    PotentialWindow perturbation;
    /// Level-K truncations of the perturbation, K = 0..K_levels.
    std::vector<Approximant> approximants;
    Sequences sequences;
    Partition partition{-1, {-1, 0}};
    std::size_t depth = 0;
    /// sum_{k > depth} eps_k.
    double tail_bound = 0.0;
    double sup_norm = 0.0;
};

struct LimitPeriodicSpec {
    double eps = 0.1;
    double gamma = 0.04;
    std::size_t levels = 2;
    /// Levels beyond `levels` only add independent site draws; sampling stops
    /// at this depth.
    std::size_t depth = 64;
    std::optional<PotentialWindow> background;
    Density density = Density::uniform();
    std::int64_t cap = kDefaultLevelCap;
};

/// Throws OutOfRange when L > n_{levels}.
LimitPeriodicResult limit_periodic_potential(const LimitPeriodicSpec& spec, std::int64_t L,
                                             std::uint64_t seed);

/// Periodic copy (n + n_k) mod (2 n_k + 1) - n_k.
std::int64_t periodic_site(std::int64_t n, std::int64_t n_k) noexcept;

struct Block {
    std::int64_t index = 0;
    std::int64_t first = 0;
    std::int64_t last = 0;
    double max_amplitude = 0.0;
    double threshold = 0.0;
};

struct QpBumpSpec {
    Frequency alpha = Frequency::parse("0.6180339887498948482045868343656381177203");
    double omega = 0.0;
    double eps = 0.1;
    double exponent = 0.25;
    /// f on the circle, chi_n = f(z_n).
    std::function<double(double)> background = [](double) { return 0.0; };
    double background_sup = 0.0;
    double radius_cap = 0.25;
};

struct QpBumpResult {
    PotentialWindow window;
    std::vector<double> amplitudes;  // a_n in site order
    std::vector<double> radii;
    std::vector<double> orbit;       // z_n in [0, 1)
    std::vector<double> xi;
    std::vector<double> background;  // chi_n
    /// Coefficients of xi_m, |m| < |n|, contributed by overlapping bumps.
    std::vector<LinearFunctional> functionals;
    std::vector<Block> blocks;
    double min_orbit_gap = 0.0;
    /// sum over blocks of the largest amplitude.
    double block_sum = 0.0;
};

/// a_n = (eps / 100) (1 + |n|)^{-exponent}.
double bump_amplitude(double eps, double exponent, std::int64_t n);

/// Blocks ..., -1, 0, 1, ... intersecting [-L, L]; block i has largest
/// amplitude at most eps 2^{-(|i|+2)}.
std::vector<Block> bump_blocks(double eps, double exponent, std::int64_t L);

/// Throws InvalidArgument for degenerate (repeating) orbits.
QpBumpResult qp_bump_potential(const QpBumpSpec& spec, std::int64_t L, std::uint64_t seed);

/// Tent of height eps^gt at z with half width eps on the circle.
double holder_tent(double z, double eps, double gammatilde, double x);

struct HolderValue {
    double value = 0.0;
    /// Bound on the omitted |n| > N_terms part over represented levels.
    double tail_bound = 0.0;
    /// sum_k 2 (100 q_{k+1})^{-gt} over represented k.
    double total_bound = 0.0;
};

/// Half width of the tent g_n: 1 / (100 q_{k+1}) with q_k <= |2n| < q_{k+1};
/// 0 for n = 0 (g_0 is identically zero).
double holder_width(const Convergents& c, std::int64_t n);

/// G(x) = sum_{|n| <= N} mu_n g_n(x), omega = 0.  OutOfRange when N exceeds
/// the represented convergents.
HolderValue holder_G(const Convergents& c, double gammatilde,
                     const std::function<double(std::int64_t)>& mu, double x,
                     std::int64_t N_terms);

/// Precomputed tents for repeated evaluation of G.
class HolderSum {
public:
    HolderSum(const Convergents& c, double gammatilde, const std::function<double(std::int64_t)>& mu,
              std::int64_t N_terms);
    double operator()(double x) const;
    double tail_bound() const noexcept { return tail_bound_; }
    double total_bound() const noexcept { return total_bound_; }

private:
    struct Tent {
        Fixed center;
        double width;
        double weight;  // mu_n * width^{gt - 1}
    };
    std::vector<Tent> tents_;
    double tail_bound_ = 0.0;
    double total_bound_ = 0.0;
};

}  // namespace kslab

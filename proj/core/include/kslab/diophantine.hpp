#pragma once

#include "kslab/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kslab {

using BigInt = boost::multiprecision::cpp_int;

/// Point of R/Z as a 128-bit binary fraction; addition and integer
/// multiplication wrap exactly modulo 1.
__extension__ typedef unsigned __int128 Fixed;
/// Signed companion of Fixed for exact wide integer arithmetic.
__extension__ typedef __int128 Int128;

double fixed_to_double(Fixed x) noexcept;
Fixed fixed_from_double(double x) noexcept;
/// Circle distance min(frac, 1 - frac) of a fixed-point difference.
double fixed_circle_distance(Fixed diff) noexcept;

/// A rotation frequency alpha in (0, 1).  Either an exact rational p/q or a
/// decimal with an explicit digit count, which is read as an approximation
/// known to within one unit in the last digit.
class Frequency {
public:
    /// Accepts "p/q" (exact) or "0.ddd..." (decimal).
    static Frequency parse(std::string_view text);
    static Frequency rational(BigInt p, BigInt q);

    bool exact() const noexcept { return exact_; }
    /// Number of decimal digits (0 for exact rationals).
    int digits() const noexcept { return digits_; }
    const BigInt& numerator() const noexcept { return num_; }
    const BigInt& denominator() const noexcept { return den_; }
    const std::string& text() const noexcept { return text_; }

    double to_double() const;
    /// floor(alpha * 2^128) of the stored value.
    Fixed fixed() const;

private:
    BigInt num_;
    BigInt den_{1};
    bool exact_ = true;
    int digits_ = 0;
    std::string text_;
};

struct ConvergentEntry {
    BigInt a;  // partial quotient a_k
    BigInt p;
    BigInt q;
};

/// Continued-fraction approximants p_k/q_k, k = 0..size()-1, with
/// p_k = a_k p_{k-1} + p_{k-2} and q_k = a_k q_{k-1} + q_{k-2} exactly.
class Convergents {
public:
    Convergents() = default;
    /// Validates the recurrences (throws InvalidArgument otherwise).
    Convergents(std::vector<ConvergentEntry> entries, std::optional<Frequency> alpha,
                bool terminated);

    std::size_t size() const noexcept { return entries_.size(); }
    const ConvergentEntry& operator[](std::size_t k) const { return entries_.at(k); }
    const std::vector<ConvergentEntry>& entries() const noexcept { return entries_; }
    const std::optional<Frequency>& alpha() const noexcept { return alpha_; }
    /// True when alpha is rational and the expansion ended.
    bool terminated() const noexcept { return terminated_; }

    double q(std::size_t k) const;
    double log_q(std::size_t k) const;

    /// Fixed-point alpha: the stored frequency, or p_K/q_K of the deepest
    /// convergent for synthetic tables.
    Fixed alpha_fixed() const;

    /// CSV `k,a_k,p_k,q_k`.
    void write_csv(const std::filesystem::path& path) const;
    static Convergents read_csv(const std::filesystem::path& path);

private:
    std::vector<ConvergentEntry> entries_;
    std::optional<Frequency> alpha_;
    bool terminated_ = false;
};

/// Precision of a decimal frequency ran out before the requested depth.
class PrecisionError : public Error {
public:
    PrecisionError(const std::string& what, std::size_t last_safe_k, Convergents partial)
        : Error(what), last_safe_k_(last_safe_k), partial_(std::move(partial))
    {
    }
    std::size_t last_safe_k() const noexcept { return last_safe_k_; }
    const Convergents& partial() const noexcept { return partial_; }

private:
    std::size_t last_safe_k_;
    Convergents partial_;
};

/// Exact convergents k = 0..k_max.  Decimal inputs expand both ends of the
/// uncertainty interval in lock step and stop where they disagree.
Convergents continued_fraction(const Frequency& alpha, std::size_t k_max);

struct GapReport {
    std::size_t k = 0;
    /// Pairs range over |2n| < q_{k+1}, i.e. |n| <= n_max.
    std::int64_t n_max = 0;
    double min_gap = 0.0;
    /// Difference n1 - n2 attaining the minimum.
    std::int64_t argmin = 0;
    double bound = 0.0;  // 1 / (q_k + q_{k+1})
    bool holds = false;  // min_gap > bound
    bool chain_holds = false;  // 1/(2 q_{k+1}) < 1/(q_k + q_{k+1}), exact integers
};

/// Minimum circle distance between orbit points z_n = n alpha, n1 != n2,
/// |2 n1|, |2 n2| < q_{k+1}.  The distance of a pair depends only on
/// n1 - n2, so every difference is scanned.  Refuses (InvalidArgument) scans
/// with n_max above 2^32.
GapReport gap_check(const Convergents& c, std::size_t k);

struct SeriesReport {
    std::vector<double> terms;
    std::vector<double> partial_sums;
    /// Heuristic: last term / last partial sum < 1e-12.  Never a proof.
    bool converged = false;
    double last_ratio = 0.0;
};

/// S_K = sum_{k=1}^{K} exp(-kappa q_k^{1-2g}) q_{k+1}^{g/2}, K = 1..K_max.
SeriesReport condkappa_partial(const Convergents& c, double kappa, double gammatilde,
                               std::size_t K);

enum class SeriesKind { thm_bs, general, condi, e111_e222 };

SeriesKind parse_series_kind(std::string_view name);

struct SummabilityParams {
    /// a_n for thm_bs and e111_e222.
    std::function<double(std::int64_t)> scale;
    /// eps_k for general and condi, indexed by |m|.
    std::function<double(std::int64_t)> level_eps;
    /// m(n) for general and condi.
    std::function<std::int64_t(std::int64_t)> level_of;
    double d = 1.0;  // also delta for e111_e222
    /// Clamp inside min{., ., lambda}; infinity disables it.
    double lambda = std::numeric_limits<double>::infinity();
};

/// Partial sums of the cited summability series.  Symmetric series report
/// S_N = sum_{|n| <= N}; condi reports sum_{0 <= n <= N}.
SeriesReport summability_partial(SeriesKind kind, const SummabilityParams& params,
                                 std::int64_t N);

/// a_n = (100 q_{k+1})^{-g} where k is the largest index with q_k <= |2n|
/// (k = 0 for n = 0).
std::function<double(std::int64_t)> block_scale(const Convergents& c, double gammatilde);

struct BlockContribution {
    std::size_t k = 0;
    std::int64_t first = 0;  // first n >= 1 with |2n| >= q_k
    std::int64_t last = 0;   // last n with |2n| < q_{k+1}
    double square_sum = 0.0;      // sum of a_s^2 over the block
    double prefix_square_sum = 0.0;  // sum of a_s^2, 1 <= s < first
    double contribution = 0.0;    // block part of the positive-side series
};

/// Per-block decomposition of the positive-side series with block_scale,
/// for every complete block whose last index does not exceed n_limit.
std::vector<BlockContribution> e111_blocks(const Convergents& c, double gammatilde,
                                           double delta, std::int64_t n_limit);

}  // namespace kslab

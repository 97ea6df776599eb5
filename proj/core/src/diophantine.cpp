#include "kslab/diophantine.hpp"

#include "kslab/csv.hpp"
#include "kslab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kslab {

namespace mp = boost::multiprecision;

namespace {

const BigInt& two_pow_128()
{
    static const BigInt value = BigInt(1) << 128;
    return value;
}

Fixed to_fixed(const BigInt& v)
{
    const BigInt low_mask = (BigInt(1) << 64) - 1;
    const BigInt wrapped = v & ((BigInt(1) << 128) - 1);
    const auto lo = static_cast<std::uint64_t>(wrapped & low_mask);
    const auto hi = static_cast<std::uint64_t>(wrapped >> 64);
    return (static_cast<Fixed>(hi) << 64) | lo;
}

double big_log(const BigInt& v)
{
    if (v <= 0)
        return -std::numeric_limits<double>::infinity();
    const std::size_t bits = mp::msb(v);
    if (bits < 900)
        return std::log(v.convert_to<double>());
    const std::size_t shift = bits - 60;
    const BigInt top = v >> shift;
    return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

}  // namespace

double fixed_to_double(Fixed x) noexcept
{
    const auto hi = static_cast<std::uint64_t>(x >> 64);
    const auto lo = static_cast<std::uint64_t>(x);
    return std::ldexp(static_cast<double>(hi), -64) + std::ldexp(static_cast<double>(lo), -128);
}

Fixed fixed_from_double(double x) noexcept
{
    double frac = x - std::floor(x);
    if (!(frac < 1.0))
        frac = 0.0;
    const double hi = std::floor(std::ldexp(frac, 64));
    const double rest = std::ldexp(frac, 64) - hi;
    const auto hi_bits = static_cast<std::uint64_t>(hi);
    const auto lo_bits = static_cast<std::uint64_t>(std::ldexp(rest, 64));
    return (static_cast<Fixed>(hi_bits) << 64) | lo_bits;
}

double fixed_circle_distance(Fixed diff) noexcept
{
    const Fixed neg = static_cast<Fixed>(0) - diff;
    return fixed_to_double(diff < neg ? diff : neg);
}

Frequency Frequency::parse(std::string_view text)
{
    std::string s(text);
    s.erase(std::remove_if(s.begin(), s.end(), [](char ch) { return ch == ' ' || ch == '_'; }),
            s.end());
    if (s.empty())
        throw InvalidArgument("frequency: empty input");

    if (auto slash = s.find('/'); slash != std::string::npos) {
        Frequency f = rational(BigInt(s.substr(0, slash)), BigInt(s.substr(slash + 1)));
        f.text_ = s;
        return f;
    }

    auto dot = s.find('.');
    if (dot == std::string::npos || s.substr(0, dot).find_first_not_of('0') != std::string::npos)
        throw InvalidArgument("frequency: decimal input must have the form 0.ddd, got '" + s + "'");
    const std::string digits = s.substr(dot + 1);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidArgument("frequency: malformed decimal '" + s + "'");

    Frequency f;
    f.num_ = BigInt(digits);
    f.den_ = mp::pow(BigInt(10), static_cast<unsigned>(digits.size()));
    f.exact_ = false;
    f.digits_ = static_cast<int>(digits.size());
    f.text_ = s;
    if (f.num_ <= 1)
        throw InvalidArgument("frequency: decimal must lie in (0, 1)");
    return f;
}

Frequency Frequency::rational(BigInt p, BigInt q)
{
    if (q <= 0 || p <= 0 || p >= q)
        throw InvalidArgument("frequency: rational must satisfy 0 < p/q < 1");
    const BigInt g = mp::gcd(p, q);
    Frequency f;
    f.num_ = p / g;
    f.den_ = q / g;
    f.exact_ = true;
    f.text_ = f.num_.str() + "/" + f.den_.str();
    return f;
}

double Frequency::to_double() const
{
    using boost::multiprecision::cpp_rational;
    return cpp_rational(num_, den_).convert_to<double>();
}

Fixed Frequency::fixed() const
{
    return to_fixed((num_ << 128) / den_);
}

Convergents::Convergents(std::vector<ConvergentEntry> entries, std::optional<Frequency> alpha,
                         bool terminated)
    : entries_(std::move(entries)), alpha_(std::move(alpha)), terminated_(terminated)
{
    BigInt p2 = 0, p1 = 1, q2 = 1, q1 = 0;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        const auto& e = entries_[k];
        if (e.a < 0 || (k > 0 && e.a < 1))
            throw InvalidArgument("convergents: invalid partial quotient at k = " +
                                  std::to_string(k));
        if (e.p != e.a * p1 + p2 || e.q != e.a * q1 + q2)
            throw InvalidArgument("convergents: recurrence violated at k = " + std::to_string(k));
        p2 = p1;
        p1 = e.p;
        q2 = q1;
        q1 = e.q;
    }
}

double Convergents::q(std::size_t k) const
{
    return entries_.at(k).q.convert_to<double>();
}

double Convergents::log_q(std::size_t k) const
{
    return big_log(entries_.at(k).q);
}

Fixed Convergents::alpha_fixed() const
{
    if (alpha_)
        return alpha_->fixed();
    if (entries_.empty())
        throw InvalidArgument("convergents: empty table has no frequency");
    const auto& last = entries_.back();
    return to_fixed((last.p << 128) / last.q);
}

void Convergents::write_csv(const std::filesystem::path& path) const
{
    csv::Writer out(path, {"k", "a_k", "p_k", "q_k"});
    for (std::size_t k = 0; k < entries_.size(); ++k)
        out.row({std::to_string(k), entries_[k].a.str(), entries_[k].p.str(), entries_[k].q.str()});
}

Convergents Convergents::read_csv(const std::filesystem::path& path)
{
    const csv::Table t = csv::read(path);
    if (t.header != std::vector<std::string>{"k", "a_k", "p_k", "q_k"})
        throw InvalidArgument("convergents: expected header k,a_k,p_k,q_k in " + path.string());
    std::vector<ConvergentEntry> entries;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row[0] != std::to_string(i))
            throw InvalidArgument("convergents: rows must be ordered k = 0, 1, ...");
        entries.push_back({BigInt(row[1]), BigInt(row[2]), BigInt(row[3])});
    }
    return Convergents(std::move(entries), std::nullopt, false);
}

Convergents continued_fraction(const Frequency& alpha, std::size_t k_max)
{
    std::vector<ConvergentEntry> entries;
    BigInt p2 = 0, p1 = 1, q2 = 1, q1 = 0;
    auto emit = [&](const BigInt& a) {
        ConvergentEntry e{a, a * p1 + p2, a * q1 + q2};
        p2 = p1;
        p1 = e.p;
        q2 = q1;
        q1 = e.q;
        entries.push_back(std::move(e));
    };

    if (alpha.exact()) {
        BigInt num = alpha.numerator();
        BigInt den = alpha.denominator();
        bool terminated = false;
        while (entries.size() <= k_max) {
            const BigInt a = num / den;
            emit(a);
            const BigInt rem = num - a * den;
            if (rem == 0) {
                terminated = true;
                break;
            }
            num = den;
            den = rem;
        }
        return Convergents(std::move(entries), alpha, terminated);
    }

    // The decimal is known to within one unit in its last digit; expand both
    // ends and keep the partial quotients they share.
    BigInt lo_num = alpha.numerator() - 1, lo_den = alpha.denominator();
    BigInt hi_num = alpha.numerator() + 1, hi_den = alpha.denominator();
    while (entries.size() <= k_max) {
        const BigInt a_lo = lo_num / lo_den;
        const BigInt a_hi = hi_num / hi_den;
        if (a_lo != a_hi)
            break;
        const BigInt r_lo = lo_num - a_lo * lo_den;
        const BigInt r_hi = hi_num - a_hi * hi_den;
        emit(a_lo);
        if (r_lo == 0 || r_hi == 0)
            break;
        lo_num = lo_den;
        lo_den = r_lo;
        hi_num = hi_den;
        hi_den = r_hi;
    }
    Convergents out(std::move(entries), alpha, false);
    if (out.size() <= k_max) {
        const std::size_t last_safe = out.size() == 0 ? 0 : out.size() - 1;
        throw PrecisionError("continued_fraction: " + std::to_string(alpha.digits()) +
                                 "-digit input supports k <= " + std::to_string(last_safe) +
                                 ", requested " + std::to_string(k_max),
                             last_safe, std::move(out));
    }
    return out;
}

GapReport gap_check(const Convergents& c, std::size_t k)
{
    if (k + 1 >= c.size())
        throw OutOfRange("gap_check: q_{k+1} not represented for k = " + std::to_string(k));
    const BigInt& qk = c[k].q;
    const BigInt& qk1 = c[k + 1].q;
    const BigInt n_max_big = (qk1 - 1) / 2;
    if (n_max_big > BigInt(std::int64_t{1} << 32))
        throw InvalidArgument("gap_check: q_{k+1} too large for exhaustive scan");

    GapReport r;
    r.k = k;
    r.n_max = n_max_big.convert_to<std::int64_t>();
    r.bound = 1.0 / (qk + qk1).convert_to<double>();
    r.chain_holds = qk1 > qk;

    const Fixed alpha = c.alpha_fixed();
    const std::int64_t span = 2 * r.n_max;
    if (span == 0) {
        r.min_gap = std::numeric_limits<double>::infinity();
        r.holds = true;
        return r;
    }
    Fixed best = ~static_cast<Fixed>(0);
    Fixed acc = 0;
    for (std::int64_t j = 1; j <= span; ++j) {
        acc += alpha;
        const Fixed neg = static_cast<Fixed>(0) - acc;
        const Fixed d = acc < neg ? acc : neg;
        if (d < best) {
            best = d;
            r.argmin = j;
        }
    }
    r.min_gap = fixed_to_double(best);
    const Fixed bound_fixed = to_fixed(two_pow_128() / (qk + qk1));
    r.holds = best > bound_fixed;
    return r;
}

SeriesReport condkappa_partial(const Convergents& c, double kappa, double gammatilde,
                               std::size_t K)
{
    if (K < 1 || K + 1 >= c.size())
        throw OutOfRange("condkappa_partial: need 1 <= K with q_{K+1} represented");
    if (!(kappa > 0.0) || !(gammatilde > 0.0 && gammatilde < 0.5))
        throw InvalidArgument("condkappa_partial: kappa > 0 and gammatilde in (0, 1/2) required");
    SeriesReport r;
    numerics::CompensatedSum sum;
    for (std::size_t k = 1; k <= K; ++k) {
        const double log_term = -kappa * std::exp((1.0 - 2.0 * gammatilde) * c.log_q(k)) +
                                0.5 * gammatilde * c.log_q(k + 1);
        const double term = std::exp(log_term);
        sum.add(term);
        r.terms.push_back(term);
        r.partial_sums.push_back(sum.value());
    }
    const double last = r.partial_sums.back();
    r.last_ratio = last > 0.0 ? r.terms.back() / last : 0.0;
    r.converged = std::isfinite(last) && r.last_ratio < 1e-12;
    return r;
}

SeriesKind parse_series_kind(std::string_view name)
{
    if (name == "thm-bs")
        return SeriesKind::thm_bs;
    if (name == "general")
        return SeriesKind::general;
    if (name == "condi")
        return SeriesKind::condi;
    if (name == "e111-e222")
        return SeriesKind::e111_e222;
    throw InvalidArgument("unknown series kind '" + std::string(name) + "'");
}

namespace {

/// Terms a_n^{-1/2} exp(-d sum_{j=1}^{floor((|n|-1)/2)} min{a_{s2j}^2, a_{s(2j-1)}^2, lambda})
/// on one side s = +-1, for |n| = 0..N.
std::vector<double> paired_min_terms(const std::function<double(std::int64_t)>& a, double d,
                                     double lambda, std::int64_t sign, std::int64_t N)
{
    std::vector<double> out(static_cast<std::size_t>(N + 1));
    // prefix[J] = sum_{j=1}^{J} min{...}
    std::vector<double> prefix(static_cast<std::size_t>(N / 2 + 2), 0.0);
    numerics::CompensatedSum acc;
    for (std::size_t J = 1; J < prefix.size(); ++J) {
        const auto j = static_cast<std::int64_t>(J);
        const double even = a(sign * 2 * j);
        const double odd = a(sign * (2 * j - 1));
        acc.add(std::min({even * even, odd * odd, lambda}));
        prefix[J] = acc.value();
    }
    for (std::int64_t n = 0; n <= N; ++n) {
        const std::int64_t J = n == 0 ? 0 : (n - 1) / 2;
        const double an = a(sign * n);
        out[static_cast<std::size_t>(n)] =
            std::exp(-d * prefix[static_cast<std::size_t>(J)]) / std::sqrt(an);
    }
    return out;
}

SeriesReport finish(std::vector<double> terms)
{
    SeriesReport r;
    numerics::CompensatedSum sum;
    for (double t : terms) {
        sum.add(t);
        r.partial_sums.push_back(sum.value());
    }
    r.terms = std::move(terms);
    const double last = r.partial_sums.back();
    r.last_ratio = last > 0.0 ? r.terms.back() / last : std::numeric_limits<double>::infinity();
    r.converged = std::isfinite(last) && r.last_ratio < 1e-12;
    return r;
}

}  // namespace

SeriesReport summability_partial(SeriesKind kind, const SummabilityParams& params,
                                 std::int64_t N)
{
    if (N < 1)
        throw InvalidArgument("summability_partial: N must be positive");

    switch (kind) {
    case SeriesKind::thm_bs:
    case SeriesKind::general: {
        std::function<double(std::int64_t)> a = params.scale;
        if (kind == SeriesKind::general) {
            if (!params.level_eps || !params.level_of)
                throw InvalidArgument("summability_partial: general series needs eps and m(n)");
            a = [&params](std::int64_t n) {
                const std::int64_t m = params.level_of(n);
                return params.level_eps(m < 0 ? -m : m);
            };
        }
        if (!a)
            throw InvalidArgument("summability_partial: thm-bs series needs a scale rule");
        const auto pos = paired_min_terms(a, params.d, params.lambda, 1, N);
        const auto neg = paired_min_terms(a, params.d, params.lambda, -1, N);
        std::vector<double> terms(static_cast<std::size_t>(N + 1));
        terms[0] = pos[0];
        for (std::size_t n = 1; n < terms.size(); ++n)
            terms[n] = pos[n] + neg[n];
        return finish(std::move(terms));
    }
    case SeriesKind::condi: {
        if (!params.level_eps || !params.level_of)
            throw InvalidArgument("summability_partial: condi series needs eps and m(n)");
        auto eps_at = [&params](std::int64_t n) {
            const std::int64_t m = params.level_of(n);
            return params.level_eps(m < 0 ? -m : m);
        };
        std::vector<double> terms(static_cast<std::size_t>(N + 1));
        numerics::CompensatedSum exponent;
        std::int64_t summed_to = 0;  // exponent holds sum_{j=1}^{summed_to}
        for (std::int64_t n = 0; n <= N; ++n) {
            const std::int64_t J = n == 0 ? 0 : (n - 1) / 2;
            while (summed_to < J) {
                ++summed_to;
                const double e = eps_at(2 * summed_to);
                exponent.add(e * e);
            }
            terms[static_cast<std::size_t>(n)] =
                std::exp(-params.d * exponent.value()) / std::sqrt(eps_at(n));
        }
        return finish(std::move(terms));
    }
    case SeriesKind::e111_e222: {
        if (!params.scale)
            throw InvalidArgument("summability_partial: e111-e222 series needs a scale rule");
        const auto& a = params.scale;
        std::vector<double> terms(static_cast<std::size_t>(N + 1));
        numerics::CompensatedSum pos_exp;
        numerics::CompensatedSum neg_exp;
        for (std::int64_t n = 0; n <= N; ++n) {
            const double an_neg = a(-n);
            neg_exp.add(an_neg * an_neg);  // sum_{s=-n}^{0} a_s^2
            double t = std::exp(-params.d * neg_exp.value()) / std::sqrt(an_neg);
            if (n >= 1) {
                const double an = a(n);
                pos_exp.add(an * an);  // sum_{s=1}^{n} a_s^2
                t += std::exp(-params.d * pos_exp.value()) / std::sqrt(an);
            }
            terms[static_cast<std::size_t>(n)] = t;
        }
        return finish(std::move(terms));
    }
    }
    throw InvalidArgument("summability_partial: unknown kind");
}

std::function<double(std::int64_t)> block_scale(const Convergents& c, double gammatilde)
{
    std::vector<double> q;
    for (std::size_t k = 0; k < c.size(); ++k)
        q.push_back(c.q(k));
    return [q = std::move(q), gammatilde](std::int64_t n) {
        const double m = 2.0 * static_cast<double>(n < 0 ? -n : n);
        // largest k with q_k <= |2n|
        auto it = std::upper_bound(q.begin(), q.end(), m);
        std::size_t k = it == q.begin() ? 0 : static_cast<std::size_t>(it - q.begin()) - 1;
        if (k + 1 >= q.size())
            throw OutOfRange("block_scale: |2n| beyond the represented convergents");
        return std::pow(100.0 * q[k + 1], -gammatilde);
    };
}

std::vector<BlockContribution> e111_blocks(const Convergents& c, double gammatilde,
                                           double delta, std::int64_t n_limit)
{
    const auto a = block_scale(c, gammatilde);
    std::vector<BlockContribution> out;
    numerics::CompensatedSum prefix;
    std::int64_t next = 1;
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
        const double qk = c.q(k);
        const double qk1 = c.q(k + 1);
        if (!(qk1 > qk))
            continue;
        BlockContribution b;
        b.k = k;
        b.first = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(qk / 2.0)));
        b.last = static_cast<std::int64_t>(std::ceil(qk1 / 2.0)) - 1;
        if (b.last < b.first)
            continue;
        if (b.last > n_limit)
            break;
        while (next < b.first) {
            const double v = a(next);
            prefix.add(v * v);
            ++next;
        }
        b.prefix_square_sum = prefix.value();
        numerics::CompensatedSum block_sq;
        numerics::CompensatedSum contribution;
        for (std::int64_t n = b.first; n <= b.last; ++n) {
            const double v = a(n);
            prefix.add(v * v);
            block_sq.add(v * v);
            contribution.add(std::exp(-delta * prefix.value()) / std::sqrt(v));
        }
        next = b.last + 1;
        b.square_sum = block_sq.value();
        b.contribution = contribution.value();
        out.push_back(b);
    }
    return out;
}

}  // namespace kslab

#include "kslab/potentials.hpp"

#include "kslab/csv.hpp"
#include "kslab/error.hpp"
#include "kslab/numerics.hpp"
#include "kslab/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace kslab {

namespace {

std::string fmt(double x)
{
    return csv::format(x);
}

std::string fmt_int(std::int64_t x)
{
    return std::to_string(x);
}

double support_radius(const Density& d)
{
    const Interval s = d.support();
    return std::max(std::abs(s.lo), std::abs(s.hi));
}

std::size_t index_in(std::int64_t n, std::int64_t L)
{
    return static_cast<std::size_t>(n + L);
}

}  // namespace

double LinearFunctional::plus_norm() const noexcept
{
    double s = 0.0;
    for (const auto& [site, b] : coefficients)
        s += std::abs(b);
    return s;
}

std::int64_t LinearFunctional::reach() const noexcept
{
    std::int64_t r = -1;
    for (const auto& [site, b] : coefficients)
        r = std::max(r, site < 0 ? -site : site);
    return r;
}

double LinearFunctional::apply(const std::function<double(std::int64_t)>& xi) const
{
    double s = 0.0;
    for (const auto& [site, b] : coefficients)
        s += b * xi(site);
    return s;
}

double PotentialWindow::at(std::int64_t n) const
{
    if (!contains(n))
        throw OutOfRange("site " + std::to_string(n) + " outside the potential window [" +
                         std::to_string(first_site) + ", " + std::to_string(last_site()) + "]");
    return values[static_cast<std::size_t>(n - first_site)];
}

double PotentialWindow::sup_norm() const noexcept
{
    double s = 0.0;
    for (double v : values)
        s = std::max(s, std::abs(v));
    return s;
}

void PotentialWindow::write_csv(const std::filesystem::path& path) const
{
    csv::Writer out(path, {"n", "V"});
    for (std::size_t i = 0; i < values.size(); ++i)
        out.row({fmt_int(first_site + static_cast<std::int64_t>(i)), fmt(values[i])});
}

PotentialWindow PotentialWindow::read_csv(const std::filesystem::path& path)
{
    const csv::Table t = csv::read(path);
    if (t.header != std::vector<std::string>{"n", "V"})
        throw InvalidArgument(path.string() + ": expected header n,V");
    PotentialWindow w;
    w.construction = "file";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::int64_t n = 0;
        double v = 0.0;
        const auto r1 = std::from_chars(row[0].data(), row[0].data() + row[0].size(), n);
        const auto r2 = std::from_chars(row[1].data(), row[1].data() + row[1].size(), v);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || !std::isfinite(v))
            throw InvalidArgument(path.string() + ": malformed row " + std::to_string(i + 2));
        if (i == 0)
            w.first_site = n;
        else if (n != w.first_site + static_cast<std::int64_t>(i))
            throw InvalidArgument(path.string() + ": sites must be consecutive");
        w.values.push_back(v);
    }
    if (w.values.empty())
        throw InvalidArgument(path.string() + ": empty potential");
    w.declared_bound = w.sup_norm();
    return w;
}

PotentialWindow PotentialWindow::zero(std::int64_t L)
{
    PotentialWindow w;
    w.first_site = -L;
    w.values.assign(static_cast<std::size_t>(2 * L + 1), 0.0);
    w.construction = "zero";
    w.declared_bound = 0.0;
    return w;
}

KsSample sample_ks_potential(const KsSpec& spec, std::int64_t L, std::uint64_t seed)
{
    if (L < 0)
        throw InvalidArgument("sample_ks_potential: L must be non-negative");
    const std::size_t size = static_cast<std::size_t>(2 * L + 1);
    const double radius = support_radius(spec.density);

    KsSample out;
    out.xi.resize(size);
    out.functional_term.assign(size, 0.0);
    std::vector<double> scales(size), chi(size);
    double xi_bound = 0.0;
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = index_in(n, L);
        const double a = spec.scale(n);
        if (!(a > 0.0) || !std::isfinite(a))
            throw SpecViolation("sample_ks_potential: scale a_" + std::to_string(n) +
                                " must be positive and finite");
        chi[i] = spec.background(n);
        if (!std::isfinite(chi[i]))
            throw SpecViolation("sample_ks_potential: background chi_" + std::to_string(n) +
                                " is not finite");
        scales[i] = a;
        auto stream = rng::substream(seed, {n});
        out.xi[i] = rescale(spec.density, a).sample(stream);
        xi_bound = std::max(xi_bound, a * radius);
    }

    PotentialWindow& w = out.window;
    w.first_site = -L;
    w.values.resize(size);
    w.construction = "ks";
    w.seed = seed;
    w.parameters = {{"density", spec.density.describe()}, {"L", fmt_int(L)}};
    w.declared_bound = 0.0;
    const auto xi_at = [&](std::int64_t s) { return out.xi[index_in(s, L)]; };
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = index_in(n, L);
        double norm = 0.0;
        if (spec.functional) {
            const LinearFunctional f = spec.functional(n);
            if (!f.empty()) {
                const std::int64_t absn = n < 0 ? -n : n;
                if (f.reach() >= absn)
                    throw SpecViolation("functional L_" + std::to_string(n) +
                                        " references a site s with |s| >= |n|");
                norm = f.plus_norm();
                if (norm > spec.plus_bound)
                    throw SpecViolation("functional L_" + std::to_string(n) +
                                        " exceeds the plus-norm bound");
                out.functional_term[i] = f.apply(xi_at);
            }
        }
        w.values[i] = out.xi[i] + chi[i] + out.functional_term[i];
        w.declared_bound = std::max(
            w.declared_bound, scales[i] * radius + std::abs(chi[i]) + norm * xi_bound);
    }
    return out;
}

Partition::Partition(std::int64_t m_first, std::vector<std::int64_t> breakpoints)
    : m_first_(m_first), l_(std::move(breakpoints))
{
    if (l_.size() < 2)
        throw InvalidArgument("partition needs at least two breakpoints");
    for (std::size_t i = 1; i < l_.size(); ++i)
        if (!(l_[i] > l_[i - 1]))
            throw InvalidArgument("partition breakpoints must be strictly increasing");
    if (m_first_ > -1 || m_last() < 0)
        throw InvalidArgument("partition must represent l_{-1} and l_0");
    if (!(breakpoint(-1) < 0 && breakpoint(0) >= 0))
        throw InvalidArgument("partition must satisfy l_{-1} < 0 <= l_0");
}

Partition Partition::symmetric(const std::vector<std::int64_t>& n_levels)
{
    if (n_levels.empty())
        throw InvalidArgument("symmetric partition needs at least n_0");
    const auto K = static_cast<std::int64_t>(n_levels.size()) - 1;
    std::vector<std::int64_t> l;
    for (std::int64_t m = -(K + 1); m <= K; ++m) {
        if (m < 0)
            l.push_back(-n_levels[static_cast<std::size_t>(-m - 1)] - 1);
        else
            l.push_back(n_levels[static_cast<std::size_t>(m)]);
    }
    return Partition(-(K + 1), std::move(l));
}

std::int64_t Partition::breakpoint(std::int64_t m) const
{
    if (m < m_first_ || m > m_last())
        throw OutOfRange("partition breakpoint l_" + std::to_string(m) + " not represented");
    return l_[static_cast<std::size_t>(m - m_first_)];
}

std::int64_t Partition::m_of(std::int64_t n) const
{
    if (n < first_covered() || n > last_covered())
        throw OutOfRange("site " + std::to_string(n) + " outside the represented partition");
    const auto it = std::lower_bound(l_.begin(), l_.end(), n);
    return m_first_ + static_cast<std::int64_t>(it - l_.begin());
}

HierSample sample_hier_potential(const HierSpec& spec, std::int64_t L, std::uint64_t seed)
{
    if (L < 0)
        throw InvalidArgument("sample_hier_potential: L must be non-negative");
    if (spec.level_eps.empty())
        throw InvalidArgument("sample_hier_potential: no levels");
    for (double e : spec.level_eps)
        if (!(e > 0.0) || !std::isfinite(e))
            throw InvalidArgument("sample_hier_potential: level scales must be positive");
    if (spec.tail_bound > spec.tail_tolerance) {
        std::ostringstream msg;
        msg << "truncation depth " << spec.level_eps.size() - 1 << " leaves tail "
            << spec.tail_bound << " above tolerance " << spec.tail_tolerance;
        throw SpecViolation(msg.str());
    }
    const auto K = static_cast<std::int64_t>(spec.level_eps.size()) - 1;
    const Partition& part = spec.partition;
    if (part.first_covered() > -L || part.last_covered() < L)
        throw OutOfRange("partition does not cover the window [-" + std::to_string(L) + ", " +
                         std::to_string(L) + "]");

    const double radius = support_radius(spec.density);
    const Density density = spec.density;
    const std::vector<double> level_eps = spec.level_eps;
    HierSample out;
    out.tail_bound = spec.tail_bound;
    out.draw = [density, level_eps, seed](std::int64_t n, std::size_t k) {
        auto stream = rng::substream(seed, {n, static_cast<std::int64_t>(k)});
        return rescale(density, level_eps.at(k)).sample(stream);
    };

    PotentialWindow& w = out.window;
    w.first_site = -L;
    w.values.resize(static_cast<std::size_t>(2 * L + 1));
    w.construction = "hierarchical";
    w.seed = seed;
    w.parameters = {{"density", spec.density.describe()},
                    {"depth", fmt_int(K)},
                    {"tail_bound", fmt(spec.tail_bound)},
                    {"L", fmt_int(L)}};
    w.declared_bound = 0.0;

    for (std::int64_t n = -L; n <= L; ++n) {
        const std::int64_t mn = part.m_of(n);
        const std::int64_t level = mn < 0 ? -mn : mn;
        if (level > K)
            throw OutOfRange("site " + std::to_string(n) + " sits at level " +
                             std::to_string(level) + " beyond depth " + std::to_string(K));
        double v = 0.0;
        double bound = 0.0;
        for (std::int64_t k = level; k <= K; ++k) {
            v += out.draw(n, static_cast<std::size_t>(k));
            bound += level_eps[static_cast<std::size_t>(k)] * radius;
        }
        for (std::int64_t k = 0; k < level && spec.functional; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            const LinearFunctional f = spec.functional(n, kk);
            for (const auto& [s, b] : f.coefficients) {
                const std::int64_t ms = part.m_of(s);
                const std::int64_t ls = ms < 0 ? -ms : ms;
                if (ls >= level || ls > k)
                    throw SpecViolation("functional L_{" + std::to_string(n) + "," +
                                        std::to_string(k) + "} references xi_{" +
                                        std::to_string(s) + "," + std::to_string(k) +
                                        "}, which is not an inner variable");
            }
            const double norm = f.plus_norm();
            if (norm > spec.plus_bound)
                throw SpecViolation("functional L_{" + std::to_string(n) + "," +
                                    std::to_string(k) + "} exceeds the plus-norm bound");
            v += f.apply([&](std::int64_t s) { return out.draw(s, kk); });
            bound += norm * level_eps[kk] * radius;
        }
        const double chi = spec.background(n);
        v += chi;
        bound += std::abs(chi);
        w.values[index_in(n, L)] = v;
        w.declared_bound = std::max(w.declared_bound, bound);
    }
    return out;
}

double Sequences::tail_after(std::size_t K) const
{
    return eps * std::ldexp(1.0, -static_cast<int>(K) - 2);
}

double default_level_eps(double eps, std::size_t k)
{
    return eps * std::ldexp(1.0, -static_cast<int>(k) - 2);
}

bool sequence_condition(double eps_k, double gamma, std::int64_t n, std::size_t k)
{
    const double log_term =
        -2.5 * std::log(eps_k) - gamma * static_cast<double>(n) * eps_k * eps_k;
    return log_term < -static_cast<double>(k) * std::log(2.0);
}

namespace {

/// Least n >= 1 with sequence_condition(eps_k, gamma, n, k), or nullopt past cap.
std::optional<std::int64_t> least_level(double eps_k, double gamma, std::size_t k,
                                        std::int64_t cap)
{
    const double threshold =
        (-2.5 * std::log(eps_k) + static_cast<double>(k) * std::log(2.0)) /
        (gamma * eps_k * eps_k);
    if (!(threshold < static_cast<double>(cap)))
        return std::nullopt;
    std::int64_t n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(threshold)));
    while (n > 1 && sequence_condition(eps_k, gamma, n - 1, k))
        --n;
    while (!sequence_condition(eps_k, gamma, n, k)) {
        if (n >= cap)
            return std::nullopt;
        ++n;
    }
    return n;
}

}  // namespace

Sequences gen_sequences(double eps, double gamma, std::size_t K, std::int64_t cap)
{
    if (!(eps > 0.0) || !std::isfinite(eps) || !(gamma > 0.0) || !std::isfinite(gamma))
        throw InvalidArgument("gen_sequences: eps and gamma must be positive");
    Sequences s;
    s.eps = eps;
    s.gamma = gamma;

    const auto cap_error = [&](std::size_t k) {
        return CapError("gen_sequences: n_" + std::to_string(k) + " exceeds the cap " +
                            std::to_string(cap),
                        s);
    };

    const auto n0 = least_level(default_level_eps(eps, 1), gamma, 1, cap);
    if (!n0)
        throw cap_error(0);
    s.level_eps.push_back(default_level_eps(eps, 0));
    s.n_levels.push_back(*n0);

    for (std::size_t k = 1; k <= K; ++k) {
        const auto need = least_level(default_level_eps(eps, k + 1), gamma, k + 1, cap);
        if (!need)
            throw cap_error(k);
        const Int128 base = 2 * static_cast<Int128>(s.n_levels.back()) + 1;
        const Int128 target = 2 * static_cast<Int128>(*need) + 1;
        Int128 q = (target + base - 1) / base;
        if (q < 3)
            q = 3;
        if (q % 2 == 0)
            ++q;
        const Int128 nk = (q * base - 1) / 2;
        if (nk > cap)
            throw cap_error(k);
        s.level_eps.push_back(default_level_eps(eps, k));
        s.n_levels.push_back(static_cast<std::int64_t>(nk));
    }
    return s;
}

std::int64_t periodic_site(std::int64_t n, std::int64_t n_k) noexcept
{
    const std::int64_t period = 2 * n_k + 1;
    std::int64_t r = (n + n_k) % period;
    if (r < 0)
        r += period;
    return r - n_k;
}

LimitPeriodicResult limit_periodic_potential(const LimitPeriodicSpec& spec, std::int64_t L,
                                             std::uint64_t seed)
{
    if (L < 0)
        throw InvalidArgument("limit_periodic_potential: L must be non-negative");
    if (spec.depth < spec.levels)
        throw InvalidArgument("limit_periodic_potential: depth must be at least the level count");

    LimitPeriodicResult out;
    out.sequences = gen_sequences(spec.eps, spec.gamma, spec.levels, spec.cap);
    const auto& n_levels = out.sequences.n_levels;
    if (L > n_levels.back())
        throw OutOfRange("window half-width " + std::to_string(L) + " exceeds n_" +
                         std::to_string(spec.levels) + " = " + std::to_string(n_levels.back()));
    if (spec.background && (!spec.background->contains(-L) || !spec.background->contains(L)))
        throw OutOfRange("background does not cover the window");

    out.partition = Partition::symmetric(n_levels);
    out.depth = spec.depth;
    out.tail_bound = out.sequences.tail_after(spec.depth);

    HierSpec h;
    h.partition = out.partition;
    h.density = spec.density;
    for (std::size_t k = 0; k <= spec.depth; ++k)
        h.level_eps.push_back(default_level_eps(spec.eps, k));
    h.tail_bound = out.tail_bound;
    h.plus_bound = 1.0;
    h.functional = [&n_levels](std::int64_t n, std::size_t k) {
        LinearFunctional f;
        f.coefficients[periodic_site(n, n_levels[k])] = 1.0;
        return f;
    };
    HierSample sample = sample_hier_potential(h, L, seed);

    out.perturbation = sample.window;
    out.perturbation.construction = "limit-periodic";
    out.perturbation.parameters = {{"eps", fmt(spec.eps)},
                                   {"gamma", fmt(spec.gamma)},
                                   {"levels", std::to_string(spec.levels)},
                                   {"depth", std::to_string(spec.depth)},
                                   {"density", spec.density.describe()},
                                   {"L", fmt_int(L)}};
    out.sup_norm = out.perturbation.sup_norm();

    out.window = out.perturbation;
    if (spec.background) {
        for (std::int64_t n = -L; n <= L; ++n)
            out.window.values[index_in(n, L)] += spec.background->at(n);
        out.window.declared_bound += spec.background->sup_norm();
        out.window.parameters.emplace_back("background", spec.background->construction);
    }

    for (std::size_t K = 0; K <= spec.levels; ++K) {
        Approximant a;
        a.level = K;
        a.period = 2 * n_levels[K] + 1;
        a.window.first_site = -L;
        a.window.construction = "limit-periodic-approximant";
        a.window.seed = seed;
        a.window.parameters = out.perturbation.parameters;
        a.window.parameters.emplace_back("approximant_level", std::to_string(K));
        a.window.values.resize(static_cast<std::size_t>(2 * L + 1));
        double bound = 0.0;
        for (std::size_t k = 0; k <= K; ++k)
            bound += h.level_eps[k] * support_radius(spec.density);
        a.window.declared_bound = bound;
        for (std::int64_t n = -L; n <= L; ++n) {
            double v = 0.0;
            for (std::size_t k = 0; k <= K; ++k)
                v += sample.draw(periodic_site(n, n_levels[k]), k);
            a.window.values[index_in(n, L)] = v;
        }
        out.approximants.push_back(std::move(a));
    }
    return out;
}

double bump_amplitude(double eps, double exponent, std::int64_t n)
{
    const double absn = static_cast<double>(n < 0 ? -n : n);
    return eps / 100.0 * std::pow(1.0 + absn, -exponent);
}

std::vector<Block> bump_blocks(double eps, double exponent, std::int64_t L)
{
    if (!(eps > 0.0) || !(exponent > 0.0))
        throw InvalidArgument("bump_blocks: eps and exponent must be positive");
    // starts[i] is the first non-negative site of block i >= 1.
    std::vector<std::int64_t> starts{0};
    constexpr std::int64_t kFar = std::int64_t{1} << 61;
    while (starts.back() <= L) {
        const std::size_t i = starts.size();
        const double thr = eps * std::ldexp(1.0, -static_cast<int>(i) - 2);
        const double guess = std::pow(eps / (100.0 * thr), 1.0 / exponent) - 1.0;
        std::int64_t n = guess < static_cast<double>(kFar)
                             ? std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(guess)))
                             : kFar;
        while (n > 0 && bump_amplitude(eps, exponent, n - 1) <= thr)
            --n;
        while (n < kFar && bump_amplitude(eps, exponent, n) > thr)
            ++n;
        starts.push_back(std::max(n, starts.back() + 1));
    }

    // starts = {0, s_1, ..., s_I, s_{I+1}} with s_I <= L < s_{I+1}.
    const std::size_t I = starts.size() - 2;
    std::vector<Block> blocks;
    const auto make = [&](std::int64_t index, std::int64_t first, std::int64_t last,
                          std::int64_t nearest) {
        Block b;
        b.index = index;
        b.first = first;
        b.last = last;
        b.max_amplitude = bump_amplitude(eps, exponent, nearest);
        const auto absi = static_cast<int>(index < 0 ? -index : index);
        b.threshold = eps * std::ldexp(1.0, -absi - 2);
        return b;
    };
    for (std::size_t i = I; i >= 1; --i) {
        const auto ii = static_cast<std::int64_t>(i);
        blocks.push_back(make(-ii, -(starts[i + 1] - 1), -starts[i], starts[i]));
    }
    blocks.push_back(make(0, -(starts[1] - 1), starts[1] - 1, 0));
    for (std::size_t i = 1; i <= I; ++i)
        blocks.push_back(make(static_cast<std::int64_t>(i), starts[i], starts[i + 1] - 1, starts[i]));
    return blocks;
}

QpBumpResult qp_bump_potential(const QpBumpSpec& spec, std::int64_t L, std::uint64_t seed)
{
    if (L < 0)
        throw InvalidArgument("qp_bump_potential: L must be non-negative");
    if (!(spec.eps > 0.0) || !std::isfinite(spec.eps))
        throw InvalidArgument("qp_bump_potential: eps must be positive");
    if (!(spec.exponent > 0.0 && spec.exponent < 0.5))
        throw InvalidArgument("qp_bump_potential: amplitude exponent must lie in (0, 1/2)");
    if (!(spec.radius_cap > 0.0 && spec.radius_cap <= 0.5))
        throw InvalidArgument("qp_bump_potential: radius cap must lie in (0, 1/2]");

    const Frequency& alpha = spec.alpha;
    if (alpha.exact() && alpha.denominator() <= BigInt(2 * L))
        throw InvalidArgument("qp_bump_potential: rational frequency " + alpha.text() +
                              " repeats orbit points inside the window");
    const Fixed a = alpha.fixed();
    const Fixed w0 = fixed_from_double(spec.omega);
    const auto point = [&](std::int64_t n) {
        return static_cast<Fixed>(w0 + a * static_cast<Fixed>(static_cast<Int128>(n)));
    };

    QpBumpResult out;
    out.min_orbit_gap = std::numeric_limits<double>::infinity();
    for (std::int64_t j = 1; j <= 2 * L; ++j)
        out.min_orbit_gap = std::min(
            out.min_orbit_gap,
            fixed_circle_distance(a * static_cast<Fixed>(static_cast<Int128>(j))));
    if (out.min_orbit_gap == 0.0)
        throw InvalidArgument("qp_bump_potential: orbit points coincide inside the window");

    const std::size_t size = static_cast<std::size_t>(2 * L + 1);
    std::vector<Fixed> z(size);
    out.orbit.resize(size);
    out.amplitudes.resize(size);
    out.xi.resize(size);
    out.background.resize(size);
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = index_in(n, L);
        z[i] = point(n);
        out.orbit[i] = fixed_to_double(z[i]);
        out.amplitudes[i] = bump_amplitude(spec.eps, spec.exponent, n);
        auto stream = rng::substream(seed, {n});
        out.xi[i] = stream.uniform();
        out.background[i] = spec.background(out.orbit[i]);
    }

    out.blocks = bump_blocks(spec.eps, spec.exponent, L);
    std::vector<std::size_t> block_of(size);
    for (std::size_t b = 0; b < out.blocks.size(); ++b)
        for (std::int64_t n = std::max(-L, out.blocks[b].first);
             n <= std::min(L, out.blocks[b].last); ++n)
            block_of[index_in(n, L)] = b;
    out.block_sum = 0.0;
    for (const Block& b : out.blocks)
        out.block_sum += b.max_amplitude;

    // Radii: keep every z_j with |j| <= |n| (j != n) and every other centre of
    // the same block outside the closed half-distance ball around z_n.
    out.radii.assign(size, spec.radius_cap);
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = index_in(n, L);
        const std::int64_t absn = n < 0 ? -n : n;
        double r = spec.radius_cap;
        for (std::int64_t j = -absn; j <= absn; ++j)
            if (j != n)
                r = std::min(r, 0.5 * fixed_circle_distance(z[i] - z[index_in(j, L)]));
        const Block& blk = out.blocks[block_of[i]];
        for (std::int64_t m = std::max(-L, blk.first); m <= std::min(L, blk.last); ++m)
            if (m != n)
                r = std::min(r, 0.5 * fixed_circle_distance(z[i] - z[index_in(m, L)]));
        out.radii[i] = r;
    }

    const auto bump = [&](std::size_t m, std::size_t n) {
        const double d = fixed_circle_distance(z[n] - z[m]);
        const double r = out.radii[m];
        return d < r ? out.amplitudes[m] * (1.0 - d / r) : 0.0;
    };

    PotentialWindow& w = out.window;
    w.first_site = -L;
    w.values.resize(size);
    w.construction = "qp-bump";
    w.seed = seed;
    w.parameters = {{"alpha", alpha.text()},
                    {"omega", fmt(spec.omega)},
                    {"eps", fmt(spec.eps)},
                    {"exponent", fmt(spec.exponent)},
                    {"L", fmt_int(L)}};
    w.declared_bound = spec.background_sup + out.block_sum;
    out.functionals.resize(size);
    for (std::int64_t n = -L; n <= L; ++n) {
        const std::size_t i = index_in(n, L);
        const std::int64_t absn = n < 0 ? -n : n;
        double v = out.background[i] + out.amplitudes[i] * out.xi[i];
        LinearFunctional& f = out.functionals[i];
        for (std::int64_t m = -absn + 1; m <= absn - 1; ++m) {
            const double g = bump(index_in(m, L), i);
            if (g > 0.0) {
                f.coefficients[m] = g;
                v += g * out.xi[index_in(m, L)];
            }
        }
        w.values[i] = v;
    }
    return out;
}

double holder_tent(double z, double eps, double gammatilde, double x)
{
    if (!(eps > 0.0 && eps < 0.5))
        throw InvalidArgument("holder_tent: width must lie in (0, 1/2)");
    if (!(gammatilde > 0.0 && gammatilde <= 1.0))
        throw InvalidArgument("holder_tent: exponent must lie in (0, 1]");
    const double d = numerics::circle_distance(x, z);
    if (d >= eps)
        return 0.0;
    return std::pow(eps, gammatilde - 1.0) * (eps - d);
}

double holder_width(const Convergents& c, std::int64_t n)
{
    if (n == 0)
        return 0.0;
    const BigInt t = BigInt(n < 0 ? -n : n) * 2;
    std::size_t k = 0;
    while (k + 1 < c.size() && c[k + 1].q <= t)
        ++k;
    if (k + 1 >= c.size())
        throw OutOfRange("holder_width: |2n| = " + t.str() +
                         " is beyond the represented convergents");
    return 1.0 / (100.0 * c.q(k + 1));
}

namespace {

/// sum_{k >= k_from, k + 1 represented} 2 (100 q_{k+1})^{-gt}.
double block_bound(const Convergents& c, double gammatilde, std::size_t k_from)
{
    double s = 0.0;
    for (std::size_t k = k_from; k + 1 < c.size(); ++k)
        s += 2.0 * std::pow(100.0 * c.q(k + 1), -gammatilde);
    return s;
}

}  // namespace

HolderSum::HolderSum(const Convergents& c, double gammatilde,
                     const std::function<double(std::int64_t)>& mu, std::int64_t N_terms)
{
    if (!(gammatilde > 0.0 && gammatilde < 0.5))
        throw InvalidArgument("holder_G: exponent must lie in (0, 1/2)");
    if (N_terms < 0)
        throw InvalidArgument("holder_G: N_terms must be non-negative");
    if (c.size() < 2)
        throw OutOfRange("holder_G: at least two convergents are required");
    const Fixed a = c.alpha_fixed();
    for (std::int64_t n = -N_terms; n <= N_terms; ++n) {
        if (n == 0)
            continue;
        const double m = mu(n);
        if (!(m >= 0.0 && m <= 1.0))
            throw InvalidArgument("holder_G: weights must lie in [0, 1]");
        const double w = holder_width(c, n);
        if (m > 0.0)
            tents_.push_back({static_cast<Fixed>(a * static_cast<Fixed>(static_cast<Int128>(n))),
                              w, m * std::pow(w, gammatilde - 1.0)});
    }
    total_bound_ = block_bound(c, gammatilde, 0);
    // Level of the first omitted index N + 1.
    const BigInt t = BigInt(N_terms + 1) * 2;
    std::size_t k = 0;
    while (k + 1 < c.size() && c[k + 1].q <= t)
        ++k;
    tail_bound_ = block_bound(c, gammatilde, k);
}

double HolderSum::operator()(double x) const
{
    const Fixed fx = fixed_from_double(x);
    double s = 0.0;
    for (const Tent& t : tents_) {
        const double d = fixed_circle_distance(fx - t.center);
        if (d < t.width)
            s += t.weight * (t.width - d);
    }
    return s;
}

HolderValue holder_G(const Convergents& c, double gammatilde,
                     const std::function<double(std::int64_t)>& mu, double x,
                     std::int64_t N_terms)
{
    const HolderSum g(c, gammatilde, mu, N_terms);
    return {g(x), g.tail_bound(), g.total_bound()};
}

}  // namespace kslab

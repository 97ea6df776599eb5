#include "kslab/localization.hpp"

#include "kslab/csv.hpp"
#include "kslab/error.hpp"
#include "kslab/numerics.hpp"
#include "kslab/rng.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>

namespace kslab {

WindowSampler ks_sampler(KsSpec spec, std::int64_t L)
{
    return [spec = std::move(spec), L](std::uint64_t key) {
        return sample_ks_potential(spec, L, key).window;
    };
}

WindowSampler iid_sampler(const Density& r, double a, std::int64_t L)
{
    if (!(a > 0.0))
        throw InvalidArgument("iid_sampler: scale must be positive");
    KsSpec spec;
    spec.density = r;
    spec.scale = [a](std::int64_t) { return a; };
    return ks_sampler(std::move(spec), L);
}

std::uint64_t trial_key(std::uint64_t seed, std::size_t trial, std::size_t attempt)
{
    const auto t = static_cast<std::int64_t>(trial);
    if (attempt == 0)
        return rng::derive(seed, {t});
    return rng::derive(seed, {t, static_cast<std::int64_t>(attempt)});
}

namespace {

/// Diagonalizes one trial, replacing the draw from a perturbed substream when
/// the eigensolver misses its tolerance.  Returns the attempt that succeeded.
template <class Use>
std::size_t run_trial(const WindowSampler& sampler, std::int64_t L,
                      const MonteCarloOptions& options, std::size_t trial, Use&& use)
{
    for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
        const PotentialWindow w = sampler(trial_key(options.seed, trial, attempt));
        if (w.first_site != -L || w.last_site() != L)
            throw InvalidArgument("sampler returned a window other than [-L, L]");
        try {
            use(eigen(build(w)));
            return attempt;
        } catch (const NumericalFailure&) {
        }
    }
    throw NumericalFailure("trial " + std::to_string(trial) + " failed after " +
                           std::to_string(options.max_retries) + " replacement draws");
}

}  // namespace

const DecayRow& DecayProfile::row(std::int64_t n) const
{
    for (const DecayRow& r : rows)
        if (r.n == n)
            return r;
    throw OutOfRange("no profile row for n = " + std::to_string(n));
}

void DecayProfile::write_csv(const std::filesystem::path& path) const
{
    const bool with_bound =
        std::any_of(rows.begin(), rows.end(), [](const DecayRow& r) { return r.theoretical_bound; });
    std::vector<std::string> header{"n", "mean", "stderr", "trials"};
    if (with_bound)
        header.emplace_back("theoretical_bound");
    csv::Writer out(path, header);
    for (const DecayRow& r : rows) {
        std::vector<std::string> fields{std::to_string(r.n), csv::format(r.mean),
                                        csv::format(r.std_error), std::to_string(r.trials)};
        if (with_bound)
            fields.push_back(r.theoretical_bound ? csv::format(*r.theoretical_bound) : "");
        out.row(fields);
    }
}

DecayProfile rho_estimate(const WindowSampler& sampler, std::int64_t L, std::int64_t m,
                          const MonteCarloOptions& options)
{
    if (L < 0)
        throw InvalidArgument("rho_estimate: L must be non-negative");
    if (options.trials < 2)
        throw InvalidArgument("rho_estimate: at least two trials are required");
    if (m < -L || m > L)
        throw OutOfRange("rho_estimate: reference site outside the window");

    const std::size_t trials = options.trials;
    std::vector<std::vector<double>> samples(trials);
    std::vector<std::size_t> attempts(trials, 0);
    numerics::parallel_for(trials, options.workers, [&](std::size_t t) {
        attempts[t] = run_trial(sampler, L, options, t, [&](const EigenDecomposition& e) {
            samples[t] = correlator_row(e, m);
        });
    });

    DecayProfile p;
    p.L = L;
    p.m = m;
    p.seed = options.seed;
    p.failures = static_cast<std::size_t>(
        std::count_if(attempts.begin(), attempts.end(), [](std::size_t a) { return a > 0; }));
    const auto size = static_cast<std::size_t>(2 * L + 1);
    const double count = static_cast<double>(trials);
    for (std::size_t i = 0; i < size; ++i) {
        numerics::CompensatedSum sum;
        for (std::size_t t = 0; t < trials; ++t)
            sum.add(samples[t][i]);
        const double mean = sum.value() / count;
        numerics::CompensatedSum sq;
        for (std::size_t t = 0; t < trials; ++t) {
            const double d = samples[t][i] - mean;
            sq.add(d * d);
        }
        DecayRow r;
        r.n = -L + static_cast<std::int64_t>(i);
        r.mean = mean;
        r.std_error = std::sqrt(sq.value() / (count - 1.0) / count);
        r.trials = trials;
        p.rows.push_back(r);
    }
    return p;
}

double dynamical_violation(const EigenDecomposition& e, const std::vector<double>& t_grid,
                           std::int64_t* worst_n, std::int64_t* worst_m, double* worst_t)
{
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const auto n = static_cast<Eigen::Index>(e.n);
    const Eigen::Map<const MatrixXd> phi(e.vectors.data(), n, n);  // rows: sites, cols: k
    const Eigen::Map<const VectorXd> energies(e.eigenvalues.data(), n);
    const MatrixXd abs_phi = phi.cwiseAbs();
    const MatrixXd corr = abs_phi * abs_phi.transpose();

    double worst = -std::numeric_limits<double>::infinity();
    MatrixXd re(n, n), im(n, n), scaled(n, n);
    for (double t : t_grid) {
        const VectorXd phase = -t * energies;
        scaled = phi * phase.array().cos().matrix().asDiagonal();
        re.noalias() = scaled * phi.transpose();
        scaled = phi * phase.array().sin().matrix().asDiagonal();
        im.noalias() = scaled * phi.transpose();
        Eigen::Index r = 0, c = 0;
        const double v =
            ((re.array().square() + im.array().square()).sqrt() - corr.array()).maxCoeff(&r, &c);
        if (v > worst) {
            worst = v;
            if (worst_n)
                *worst_n = e.first_site + r;
            if (worst_m)
                *worst_m = e.first_site + c;
            if (worst_t)
                *worst_t = t;
        }
    }
    return worst;
}

DynamicalReport dynamical_check(const WindowSampler& sampler, std::int64_t L,
                                const std::vector<double>& t_grid,
                                const MonteCarloOptions& options)
{
    DynamicalReport report;
    if (t_grid.empty()) {
        report.vacuous = true;
        return report;
    }
    for (double t : t_grid)
        if (!std::isfinite(t))
            throw InvalidArgument("dynamical_check: time grid must be finite");

    struct TrialResult {
        double violation;
        std::int64_t n, m;
        double t;
    };
    std::vector<TrialResult> results(options.trials);
    std::vector<std::size_t> attempts(options.trials, 0);
    numerics::parallel_for(options.trials, options.workers, [&](std::size_t i) {
        attempts[i] = run_trial(sampler, L, options, i, [&](const EigenDecomposition& e) {
            TrialResult& r = results[i];
            r.violation = dynamical_violation(e, t_grid, &r.n, &r.m, &r.t);
        });
    });

    for (std::size_t i = 0; i < results.size(); ++i) {
        report.per_trial.push_back(results[i].violation);
        if (attempts[i] > 0)
            ++report.failures;
        if (results[i].violation > report.max_violation) {
            report.max_violation = results[i].violation;
            report.worst_trial = i;
            report.worst_n = results[i].n;
            report.worst_m = results[i].m;
            report.worst_t = results[i].t;
        }
    }
    return report;
}

std::vector<double> time_grid(double t_max, double step)
{
    if (!(step > 0.0) || !(t_max >= 0.0) || !std::isfinite(t_max))
        throw InvalidArgument("time_grid: need step > 0 and finite t_max >= 0");
    const auto count = static_cast<std::size_t>(std::llround(t_max / step)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i)
        grid[i] = static_cast<double>(i) * step;
    return grid;
}

RateFit fit_rate(const DecayProfile& p, std::int64_t n_lo, std::int64_t n_hi)
{
    std::vector<double> xs, ys;
    for (const DecayRow& r : p.rows) {
        if (r.n < n_lo || r.n > n_hi)
            continue;
        if (!(r.mean > 0.0))
            throw InvalidArgument("fit_rate: non-positive mean at n = " + std::to_string(r.n) +
                                  " inside the fit range");
        xs.push_back(static_cast<double>(r.n > p.m ? r.n - p.m : p.m - r.n));
        ys.push_back(std::log(r.mean));
    }
    if (xs.size() < 2)
        throw InvalidArgument("fit_rate: fewer than two points in the fit range");

    const double k = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0))
        throw InvalidArgument("fit_rate: all points share the same distance");

    RateFit fit;
    fit.points = xs.size();
    const double slope = sxy / sxx;
    fit.rate = -slope;
    fit.intercept = my - slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double res = ys[i] - (fit.intercept + slope * xs[i]);
        sse += res * res;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    if (xs.size() >= 3) {
        const double dof = k - 2.0;
        fit.rate_stderr = std::sqrt(sse / dof / sxx);
        const boost::math::students_t dist(dof);
        const double q = boost::math::quantile(boost::math::complement(dist, 0.025));
        fit.ci_low = fit.rate - q * fit.rate_stderr;
        fit.ci_high = fit.rate + q * fit.rate_stderr;
    } else {
        fit.rate_stderr = std::numeric_limits<double>::infinity();
        fit.ci_low = -std::numeric_limits<double>::infinity();
        fit.ci_high = std::numeric_limits<double>::infinity();
    }
    return fit;
}

double log_theoretical_bound(const BoundParams& p, std::int64_t n)
{
    if (!(p.leb_sigma0 > 0.0) || !(p.r_sup > 0.0) || !(p.c > 0.0) || !(p.K0 > 0.0) ||
        !(p.lambda > 0.0))
        throw InvalidArgument("theoretical_bound: all parameters must be positive");
    if (!p.scale)
        throw InvalidArgument("theoretical_bound: no scale rule supplied");
    const auto scale = [&](std::int64_t s) {
        const double a = p.scale(s);
        if (!(a > 0.0))
            throw InvalidArgument("theoretical_bound: scale a_" + std::to_string(s) +
                                  " is not positive");
        return a;
    };
    const std::int64_t absn = n < 0 ? -n : n;
    const std::int64_t sign = n < 0 ? -1 : 1;
    const std::int64_t k = absn >= 1 ? (absn - 1) / 2 : 0;
    double exponent = 0.0;
    for (std::int64_t j = 1; j <= k; ++j) {
        const double a2 = scale(sign * 2 * j);
        const double a1 = scale(sign * (2 * j - 1));
        exponent += std::min({a2 * a2, a1 * a1, p.lambda});
    }
    return std::log(p.leb_sigma0) + std::log(p.r_sup) - 0.5 * std::log(scale(n)) -
           0.5 * std::log(scale(0)) - p.c * p.K0 * p.K0 * exponent;
}

double theoretical_bound(const BoundParams& p, std::int64_t n)
{
    return std::exp(log_theoretical_bound(p, n));
}

std::function<double(std::int64_t)> hierarchical_scale(const Partition& part,
                                                       std::vector<double> level_eps)
{
    return [part, level_eps = std::move(level_eps)](std::int64_t s) {
        const std::int64_t m = part.m_of(s);
        return level_eps.at(static_cast<std::size_t>(m < 0 ? -m : m));
    };
}

}  // namespace kslab

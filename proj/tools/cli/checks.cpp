#include "checks.hpp"

#include "kslab/csv.hpp"
#include "kslab/diophantine.hpp"
#include "kslab/error.hpp"
#include "kslab/ksoperators.hpp"
#include "kslab/localization.hpp"
#include "kslab/numerics.hpp"
#include "kslab/potentials.hpp"
#include "kslab/rng.hpp"
#include "kslab/spectra.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace kslab::cli {

namespace {

const char* kGolden = "0.6180339887498948482045868343656381177203";
const char* kPiMinus3 = "0.14159265358979323846264338327950288419716939937510";

class Timer {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void detail(CheckResult& r, const std::string& key, double v)
{
    r.details.emplace_back(key, csv::format(v));
}

void detail(CheckResult& r, const std::string& key, const std::string& v)
{
    r.details.emplace_back(key, v);
}

CheckResult finish(CheckResult r, const Timer& t)
{
    r.seconds = t.seconds();
    return r;
}

/// det of the change-of-variables Jacobian rebuilt from the x variables;
/// `sign` multiplies the 1/x^2 entries (+1 is the correct matrix).
double jacobian_det(const std::vector<double>& x, std::int64_t L, double sign)
{
    const auto N = static_cast<Eigen::Index>(2 * L + 1);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
    const auto idx = [L](std::int64_t n) { return static_cast<Eigen::Index>(n + L); };
    const auto xv = [&](std::int64_t n) {
        return x[static_cast<std::size_t>(n < 0 ? n + L : n + L - 1)];
    };
    for (std::int64_t n = -L; n <= L; ++n) {
        if (n == 0) {
            J.row(idx(0)).setOnes();
            continue;
        }
        const double v = xv(n);
        J(idx(n), idx(n)) = -1.0;
        J(idx(n), idx(n < 0 ? n + 1 : n - 1)) = sign / (v * v);
    }
    return J.partialPivLu().determinant();
}

}  // namespace

const std::vector<std::string>& check_names()
{
    static const std::vector<std::string> names{
        "eigensolver", "correlator", "jacobian", "factorization", "norms",
        "dynamical",   "limit_periodic", "gap",  "holder",        "summability"};
    return names;
}

CheckResult run_check(const std::string& name, const VerifySettings& s)
{
    if (name == "eigensolver")
        return check_eigensolver(s);
    if (name == "correlator")
        return check_correlator(s);
    if (name == "jacobian")
        return check_jacobian(s);
    if (name == "factorization")
        return check_factorization(s);
    if (name == "norms")
        return check_norms(s);
    if (name == "dynamical")
        return check_dynamical(s);
    if (name == "limit_periodic")
        return check_limit_periodic(s);
    if (name == "gap")
        return check_gap(s);
    if (name == "holder")
        return check_holder(s);
    if (name == "summability")
        return check_summability(s);
    throw InvalidArgument("unknown check '" + name + "'");
}

CheckResult check_eigensolver(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"eigensolver", false, 0.0, 1e-10, 0.0, {}};
    for (std::int64_t N : s.eigensolver_sizes) {
        const TridiagonalOperator op(std::vector<double>(static_cast<std::size_t>(N), 0.0), 1);
        const EigenDecomposition e = eigen(op);
        std::vector<double> exact;
        for (std::int64_t j = 1; j <= N; ++j)
            exact.push_back(2.0 * std::cos(static_cast<double>(j) * std::numbers::pi /
                                           static_cast<double>(N + 1)));
        std::sort(exact.begin(), exact.end());
        double err = 0.0;
        for (std::size_t i = 0; i < exact.size(); ++i)
            err = std::max(err, std::abs(e.eigenvalues[i] - exact[i]));
        detail(r, "max_error.N" + std::to_string(N), err);
        r.value = std::max(r.value, err);
    }
    r.passed = r.value <= r.threshold;
    return finish(r, timer);
}

CheckResult check_correlator(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"correlator", false, 0.0, 1e-10, 0.0, {}};
    rng::Stream pick = rng::substream(s.seed, {-7});
    std::int64_t largest = 0;
    for (std::size_t i = 0; i < s.correlator_instances; ++i) {
        const auto L = 1 + static_cast<std::int64_t>(
                               pick() % static_cast<std::uint64_t>(s.correlator_max_L));
        largest = std::max(largest, L);
        const auto w =
            iid_sampler(Density::uniform(), 1.0, L)(rng::derive(s.seed, {static_cast<std::int64_t>(i)}));
        const EigenDecomposition e = eigen(build(w));
        for (std::int64_t m = -L; m <= L; ++m)
            r.value = std::max(r.value, std::abs(correlator(e, m, m) - 1.0));
    }
    detail(r, "instances", static_cast<double>(s.correlator_instances));
    detail(r, "largest_L", static_cast<double>(largest));
    r.passed = r.value <= r.threshold;
    return finish(r, timer);
}

CheckResult check_jacobian(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"jacobian", false, 0.0, 1e-6, 0.0, {}};
    KsSpec spec;
    spec.background = [](std::int64_t n) {
        return 0.5 * std::cos(2.0 * std::numbers::pi * 0.6180339887498949 * static_cast<double>(n));
    };
    spec.functional = [](std::int64_t n) {
        LinearFunctional f;
        if (n != 0)
            f.coefficients[n > 0 ? n - 1 : n + 1] = 0.5;
        return f;
    };
    const double sign = s.wrong_sign_kernel ? -1.0 : 1.0;
    double jac = 0.0, ratio = 0.0, fd = 0.0, composed = 0.0, map = 0.0, rebuilt = 0.0;
    std::size_t resampled = 0;
    for (std::int64_t L : s.jacobian_L) {
        PotentialSplit split;
        for (std::int64_t n = -L; n <= L; ++n) {
            split.chi.push_back(spec.background(n));
            split.functionals.push_back(spec.functional(n));
        }
        const auto N = static_cast<std::uint64_t>(2 * L + 1);
        for (std::size_t i = 0; i < s.jacobian_samples; ++i) {
            bool done = false;
            for (std::int64_t attempt = 0; attempt < 100 && !done; ++attempt) {
                const std::uint64_t key =
                    rng::derive(s.seed, {L, static_cast<std::int64_t>(i), attempt});
                const KsSample sample = sample_ks_potential(spec, L, key);
                auto pick = rng::substream(key, {-1});
                const auto k = static_cast<std::size_t>(pick() % N);
                try {
                    const JacobianReport rep = jacobian_oracle(sample.window, k, split);
                    const double det = jacobian_det(rep.x, L, sign);
                    jac = std::max(jac, std::abs(det * rep.phi0 * rep.phi0 - 1.0));
                    rebuilt = std::max(rebuilt, std::abs(jacobian_det(rep.x, L, 1.0) /
                                                             rep.det_analytic - 1.0));
                    ratio = std::max(ratio, rep.ratio_res);
                    fd = std::max(fd, rep.matrix_discrepancy);
                    composed = std::max(composed, std::abs(rep.det_composed / rep.det_analytic - 1.0));
                    map = std::max(map, rep.map_residual);
                    done = true;
                } catch (const NumericalFailure&) {
                    ++resampled;
                }
            }
            if (!done)
                throw NumericalFailure("jacobian check: 100 consecutive degenerate samples");
        }
    }
    detail(r, "max_jac_res", jac);
    detail(r, "max_ratio_res", ratio);
    detail(r, "max_fd_discrepancy", fd);
    detail(r, "max_composed_det_gap", composed);
    detail(r, "max_map_residual", map);
    detail(r, "max_rebuilt_det_gap", rebuilt);
    detail(r, "resampled", static_cast<double>(resampled));
    detail(r, "wrong_sign_kernel", s.wrong_sign_kernel ? "true" : "false");
    r.value = jac;
    r.passed = jac <= 1e-6 && ratio <= 1e-9 && fd <= 1e-5 && composed <= 1e-5;
    return finish(r, timer);
}

CheckResult check_factorization(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"factorization", false, 0.0, 0.02, 0.0, {}};

    struct Case {
        std::string name;
        std::int64_t L, n;
        KsSpec spec;
    };
    std::vector<Case> cases;
    cases.push_back({"L1_n1_plain", 1, 1, KsSpec{}});
    {
        KsSpec k;
        k.functional = [](std::int64_t n) {
            LinearFunctional f;
            if (n != 0)
                f.coefficients[0] = 2.0;
            return f;
        };
        cases.push_back({"L1_n1_functional", 1, 1, k});
    }
    {
        KsSpec k;
        k.background = [](std::int64_t n) {
            return 0.5 * std::cos(2.0 * std::numbers::pi * 0.6180339887498949 * static_cast<double>(n));
        };
        k.functional = [](std::int64_t n) {
            LinearFunctional f;
            if (n != 0)
                f.coefficients[n > 0 ? n - 1 : n + 1] = 0.5;
            return f;
        };
        cases.push_back({"L2_n2_background_functional", 2, 2, k});
    }
    cases.push_back({"L1_n0_plain", 1, 0, KsSpec{}});

    bool ok = true;
    for (const Case& c : cases) {
        FactorizationOptions o;
        o.trials = s.factorization_trials;
        o.seed = rng::derive(s.seed, {c.L, c.n});
        o.workers = s.workers;
        o.order = c.L == 1 ? 12 : (s.factorization_quick ? 10 : 12);
        o.splits = c.L == 1 ? 2 : (s.factorization_quick ? 2 : 4);
        o.energy_pieces = c.L == 1 ? 8 : (s.factorization_quick ? 4 : 8);
        const FactorizationReport rep = factorization_oracle(c.spec, c.L, c.n, o);
        FactorizationOptions coarse = o;
        coarse.splits = std::max(1, o.splits / 2);
        const double half = factorization_integral(c.spec, c.L, c.n, coarse, true);
        const std::string p = c.name + ".";
        detail(r, p + "mc", rep.mc_value);
        detail(r, p + "mc_stderr", rep.mc_stderr);
        detail(r, p + "integral", rep.integral_value);
        detail(r, p + "integral_without_shifts", rep.integral_without_shifts);
        detail(r, p + "integral_half_resolution", half);
        detail(r, p + "rel_err", rep.rel_err);
        detail(r, p + "evaluations", rep.evaluations);
        r.value = std::max(r.value, rep.rel_err);
        ok = ok && rep.rel_err <= r.threshold;
    }
    detail(r, "trials", static_cast<double>(s.factorization_trials));
    r.passed = ok;
    return finish(r, timer);
}

CheckResult check_norms(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"norms", false, -std::numeric_limits<double>::infinity(), 1e-3, 0.0, {}};
    const Density uniform = Density::uniform();
    // Sigma_0 = [-2 - B, 2 + B] with B = 1 bounding every scaled draw used here.
    const double B = 1.0;
    std::vector<double> energies;
    for (std::size_t i = 0; i < s.norm_energies; ++i)
        energies.push_back(s.norm_energies == 1
                               ? 0.0
                               : -2.0 - B + (4.0 + 2.0 * B) * static_cast<double>(i) /
                                                static_cast<double>(s.norm_energies - 1));
    struct Item {
        double E, a;
        double s11 = 0, s12 = 0, s12_bound = 0, t22 = 0, t22_power = 0;
    };
    std::vector<Item> items;
    for (double a : s.norm_scales)
        for (double E : energies)
            items.push_back({E, a});
    numerics::parallel_for(items.size(), s.workers, [&](std::size_t i) {
        Item& it = items[i];
        const ScaledDensity d = rescale(uniform, it.a);
        const GridSpec g = GridSpec::covering(1e-3, 1e3, 2000, {it.E, it.E}, d.support(), it.a / 10.0);
        const OperatorMatrix S = build_S(d, it.E, g);
        const OperatorMatrix T = build_T(d, it.E, g);
        it.s11 = op_norm(S, 1, 1);
        it.s12 = op_norm(S, 1, 2);
        it.s12_bound = std::sqrt(d.sup_bound());
        it.t22 = op_norm(T, 2, 2);
        it.t22_power = power_norm(T.orthonormal());
    });
    double s11 = 0, s12 = -1e300, t22 = 0, cross = 0;
    for (const Item& it : items) {
        s11 = std::max(s11, it.s11);
        s12 = std::max(s12, it.s12 - it.s12_bound);
        t22 = std::max(t22, it.t22);
        cross = std::max(cross, std::abs(it.t22 - it.t22_power));
        r.value = std::max({r.value, it.s11 - 1.0, it.s12 - it.s12_bound, it.t22 - 1.0});
    }
    detail(r, "cases", static_cast<double>(items.size()));
    detail(r, "max_S_1_1", s11);
    detail(r, "max_S_1_2_minus_bound", s12);
    detail(r, "max_T_2_2", t22);
    detail(r, "max_lanczos_power_gap", cross);

    // Product bound: reported only, since K0 is not known for any density.
    const double lambda = 1.0, K0 = 1.0;
    const double c = decay_constant(uniform, 0.01, 100.0).c;
    const ProductBound pb = product_bound_check(uniform, 1.0, 1.0, 0.0, 0.5,
                                                GridSpec::square_grid(1e-3, 1e3, 1000), c, K0,
                                                lambda);
    detail(r, "product.lhs", pb.lhs);
    detail(r, "product.rhs", pb.rhs);
    detail(r, "product.holds", pb.holds ? "true" : "false");
    detail(r, "product.c", c);
    detail(r, "product.K0", K0);
    r.passed = r.value <= r.threshold;
    return finish(r, timer);
}

CheckResult check_dynamical(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"dynamical", false, 0.0, 1e-10, 0.0, {}};
    MonteCarloOptions o;
    o.trials = s.dynamical_trials;
    o.seed = s.seed;
    o.workers = s.workers;
    const DynamicalReport rep =
        dynamical_check(iid_sampler(Density::uniform(), 1.0, s.dynamical_L), s.dynamical_L,
                        time_grid(s.dynamical_t_max, s.dynamical_t_step), o);
    r.value = rep.max_violation;
    detail(r, "worst_trial", static_cast<double>(rep.worst_trial));
    detail(r, "worst_n", static_cast<double>(rep.worst_n));
    detail(r, "worst_m", static_cast<double>(rep.worst_m));
    detail(r, "worst_t", rep.worst_t);
    detail(r, "failures", static_cast<double>(rep.failures));
    r.passed = !rep.vacuous && r.value <= r.threshold;
    return finish(r, timer);
}

CheckResult check_limit_periodic(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"limit_periodic", false, -std::numeric_limits<double>::infinity(), 1e-12, 0.0,
                  {}};
    LimitPeriodicSpec spec;
    spec.eps = s.lp_eps;
    spec.gamma = s.lp_gamma;
    spec.levels = s.lp_levels;
    const Sequences seq = gen_sequences(spec.eps, spec.gamma, spec.levels);
    const std::int64_t L = seq.n_levels.back();
    const LimitPeriodicResult res = limit_periodic_potential(spec, L, s.seed);

    std::size_t mismatches = 0;
    double previous = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (const Approximant& a : res.approximants) {
        for (std::int64_t n = -L; n + a.period <= L; ++n)
            if (a.window.at(n) != a.window.at(n + a.period))
                ++mismatches;
        double dist = 0.0;
        for (std::int64_t n = -L; n <= L; ++n)
            dist = std::max(dist, std::abs(res.window.at(n) - a.window.at(n)));
        const double bound = res.sequences.tail_after(a.level);
        const std::string p = "level" + std::to_string(a.level) + ".";
        detail(r, p + "period", static_cast<double>(a.period));
        detail(r, p + "sup_distance", dist);
        detail(r, p + "tail_bound", bound);
        r.value = std::max(r.value, dist - bound);
        monotone = monotone && dist <= previous;
        previous = dist;
    }
    detail(r, "L", static_cast<double>(L));
    detail(r, "period_mismatches", static_cast<double>(mismatches));
    detail(r, "sup_norm", res.sup_norm);
    detail(r, "eps", spec.eps);
    detail(r, "monotone", monotone ? "true" : "false");
    r.passed = mismatches == 0 && res.sup_norm < spec.eps && r.value <= r.threshold && monotone;
    return finish(r, timer);
}

CheckResult check_gap(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"gap", false, 0.0, 1.0, 0.0, {}};
    bool ok = true;
    for (const auto& [name, text] : {std::pair<std::string, const char*>{"golden", kGolden},
                                     std::pair<std::string, const char*>{"pi_minus_3", kPiMinus3}}) {
        const Convergents c = continued_fraction(Frequency::parse(text), s.gap_k_max + 2);
        std::size_t chain_equalities = 0;
        for (std::size_t k = 0; k <= s.gap_k_max; ++k) {
            const GapReport g = gap_check(c, k);
            ok = ok && g.holds;
            if (!g.chain_holds)
                ++chain_equalities;  // q_k = q_{k+1}, e.g. k = 0 for the golden mean
            r.value = std::max(r.value, g.bound / g.min_gap);
        }
        detail(r, name + ".q_k_max", c.q(s.gap_k_max + 1));
        detail(r, name + ".chain_not_strict", static_cast<double>(chain_equalities));
    }
    detail(r, "k_max", static_cast<double>(s.gap_k_max));
    r.passed = ok && r.value < r.threshold;
    return finish(r, timer);
}

CheckResult check_holder(const VerifySettings& s)
{
    Timer timer;
    CheckResult r{"holder", false, 0.0, 1.0, 0.0, {}};
    const Convergents c = continued_fraction(Frequency::parse(kGolden), 40);
    const HolderSum G(c, s.holder_gammatilde, [](std::int64_t) { return 1.0; }, s.holder_terms);
    const double max_sep = 1.0 / c.q(5);
    rng::Stream st = rng::substream(s.seed, {-11});
    const auto ratio = [&](double x, double delta) {
        const double y = std::fmod(x + delta, 1.0);
        return std::abs(G(x) - G(y)) / std::pow(delta, s.holder_gamma);
    };
    for (std::size_t i = 0; i < s.holder_pairs; ++i) {
        const double x = st.uniform();
        // log-uniform separations probe every scale below 1/q_5
        const double delta = max_sep * std::pow(10.0, -12.0 * st.uniform());
        r.value = std::max(r.value, ratio(x, delta));
    }
    detail(r, "pairs", static_cast<double>(s.holder_pairs));
    detail(r, "max_separation", max_sep);
    detail(r, "terms", static_cast<double>(s.holder_terms));
    detail(r, "truncation_tail_bound", G.tail_bound());
    r.passed = r.value <= r.threshold;
    return finish(r, timer);
}

CheckResult check_summability(const VerifySettings&)
{
    Timer timer;
    CheckResult r{"summability", false, 0.0, 1e-12, 0.0, {}};
    const double a = 0.7, d = 1.0, lambda = 0.25;
    SummabilityParams p;
    p.scale = [a](std::int64_t) { return a; };
    p.d = d;
    p.lambda = lambda;
    const std::int64_t N = 200;
    const SeriesReport rep = summability_partial(SeriesKind::thm_bs, p, N);
    const double rho = std::exp(-d * std::min(a * a, lambda));
    const double head = 1.0 / std::sqrt(a);
    for (std::int64_t n = 0; n <= N; ++n) {
        // S_n = a^{-1/2} (1 + 2 sum_{j=1}^{n} rho^{floor((j-1)/2)})
        const std::int64_t pairs = n / 2;
        double inner = 2.0 * (1.0 - std::pow(rho, static_cast<double>(pairs))) / (1.0 - rho);
        if (n % 2 == 1)
            inner += std::pow(rho, static_cast<double>(pairs));
        const double exact = head * (1.0 + 2.0 * inner);
        r.value = std::max(r.value, std::abs(rep.partial_sums[static_cast<std::size_t>(n)] - exact) /
                                        exact);
    }

    SummabilityParams decaying;
    decaying.scale = [](std::int64_t n) {
        return std::pow(1.0 + std::abs(static_cast<double>(n)), -0.25);
    };
    const SeriesReport conv = summability_partial(SeriesKind::thm_bs, decaying, 20000);
    SummabilityParams harmonic;
    harmonic.scale = [](std::int64_t n) { return 1.0 / (1.0 + std::abs(static_cast<double>(n))); };
    const SeriesReport div = summability_partial(SeriesKind::thm_bs, harmonic, 20000);
    detail(r, "power_0.25.converged", conv.converged ? "true" : "false");
    detail(r, "power_0.25.last_ratio", conv.last_ratio);
    detail(r, "power_1.converged", div.converged ? "true" : "false");
    detail(r, "power_1.last_ratio", div.last_ratio);
    r.passed = r.value <= r.threshold && conv.converged && !div.converged;
    return finish(r, timer);
}

}  // namespace kslab::cli

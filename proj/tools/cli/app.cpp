#include "app.hpp"

#include "checks.hpp"
#include "config.hpp"
#include "manifest.hpp"
#include "sources.hpp"

#include "kslab/csv.hpp"
#include "kslab/diophantine.hpp"
#include "kslab/error.hpp"
#include "kslab/localization.hpp"
#include "kslab/potentials.hpp"
#include "kslab/spectra.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace kslab::cli {

namespace {

constexpr const char* kArtifactVersion = "0.1.0";
constexpr std::int64_t kSchemaVersion = 1;

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Everything a subcommand needs; outputs are tracked for cleanup.
struct Run {
    Section root;
    Section params;
    std::filesystem::path out_dir;
    std::filesystem::path config_dir;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::size_t workers = 1;
    Manifest manifest;
    std::vector<std::filesystem::path> outputs;
    std::ostream* log = nullptr;
    int status = kExitOk;

    std::filesystem::path output(const std::string& name)
    {
        auto p = out_dir / name;
        outputs.push_back(p);
        return p;
    }
    std::uint64_t need_seed() const
    {
        if (!has_seed)
            throw ConfigError("config: missing required key 'seed'");
        return seed;
    }
};

std::int64_t half_width(const Section& p)
{
    const std::int64_t L = p.integer("L");
    if (L < 0)
        throw ConfigError("config: '" + p.key_path("L") + "' must be non-negative");
    return L;
}

void cmd_sequences(Run& run)
{
    const Section& p = run.params;
    const double eps = positive(p, "eps");
    const double gamma = positive(p, "gamma");
    const std::int64_t levels = p.integer("levels");
    if (levels < 0)
        throw ConfigError("config: '" + p.key_path("levels") + "' must be non-negative");
    const std::int64_t cap = p.has("cap") ? positive_integer(p, "cap") : kDefaultLevelCap;
    p.finish();

    const Sequences s = gen_sequences(eps, gamma, static_cast<std::size_t>(levels), cap);
    csv::Writer w(run.output("sequences.csv"), {"k", "eps_k", "n_k"});
    double sum = 0.0;
    bool multiples = true, condition = true;
    for (std::size_t k = 0; k < s.n_levels.size(); ++k) {
        w.row({csv::format(static_cast<long long>(k)), csv::format(s.level_eps[k]),
               csv::format(static_cast<long long>(s.n_levels[k]))});
        sum += s.level_eps[k];
        if (k > 0) {
            const std::int64_t prev = 2 * s.n_levels[k - 1] + 1;
            const std::int64_t cur = 2 * s.n_levels[k] + 1;
            multiples = multiples && cur % prev == 0 && cur / prev >= 3;
        }
        condition = condition && sequence_condition(default_level_eps(eps, k + 1), gamma,
                                                    s.n_levels[k], k + 1);
    }
    run.manifest.set("result.sum_eps", sum);
    run.manifest.set("result.sum_below_eps", sum < eps ? "true" : "false");
    run.manifest.set("result.nontrivial_multiples", multiples ? "true" : "false");
    run.manifest.set("result.condition_holds", condition ? "true" : "false");
}

void cmd_construct(Run& run)
{
    const Section& p = run.params;
    const PotentialSource src = parse_potential(p.child("potential"), run.config_dir);
    const std::int64_t L = half_width(p);
    p.finish();
    const std::uint64_t seed = src.random() ? run.need_seed() : run.seed;

    run.manifest.set("construction", src.kind);
    run.manifest.set("spec_digest", src.digest);
    if (src.kind == "limit_periodic") {
        const LimitPeriodicResult r = limit_periodic_potential(*src.limit_periodic, L, seed);
        r.window.write_csv(run.output("potential.csv"));
        csv::Writer w(run.output("approximants.csv"), {"level", "period", "n", "V"});
        for (const Approximant& a : r.approximants)
            for (std::int64_t n = -L; n <= L; ++n)
                w.row({csv::format(static_cast<long long>(a.level)),
                       csv::format(static_cast<long long>(a.period)),
                       csv::format(static_cast<long long>(n)), csv::format(a.window.at(n))});
        run.manifest.set("result.sup_norm", r.sup_norm);
        run.manifest.set("result.tail_bound", r.tail_bound);
        for (std::size_t k = 0; k < r.sequences.n_levels.size(); ++k)
            run.manifest.set("result.n_" + std::to_string(k),
                             static_cast<long long>(r.sequences.n_levels[k]));
        return;
    }
    if (src.kind == "qp_bump") {
        const QpBumpResult r = qp_bump_potential(*src.qp_bump, L, seed);
        r.window.write_csv(run.output("potential.csv"));
        csv::Writer w(run.output("bumps.csv"), {"n", "z", "a", "radius", "xi", "chi"});
        for (std::int64_t n = -L; n <= L; ++n) {
            const auto i = static_cast<std::size_t>(n + L);
            w.row({csv::format(static_cast<long long>(n)), csv::format(r.orbit[i]),
                   csv::format(r.amplitudes[i]), csv::format(r.radii[i]), csv::format(r.xi[i]),
                   csv::format(r.background[i])});
        }
        run.manifest.set("result.min_orbit_gap", r.min_orbit_gap);
        run.manifest.set("result.block_sum", r.block_sum);
        run.manifest.set("result.blocks", static_cast<long long>(r.blocks.size()));
        return;
    }
    if (src.kind == "ks") {
        const KsSample s = sample_ks_potential(*src.ks, L, seed);
        s.window.write_csv(run.output("potential.csv"));
        csv::Writer w(run.output("components.csv"), {"n", "xi", "functional_term"});
        for (std::int64_t n = -L; n <= L; ++n) {
            const auto i = static_cast<std::size_t>(n + L);
            w.row({csv::format(static_cast<long long>(n)), csv::format(s.xi[i]),
                   csv::format(s.functional_term[i])});
        }
        run.manifest.set("result.sup_norm", s.window.sup_norm());
        return;
    }
    const PotentialWindow w = src.draw(L, seed);
    w.write_csv(run.output("potential.csv"));
    run.manifest.set("result.sup_norm", w.sup_norm());
}

void cmd_spectrum(Run& run)
{
    const Section& p = run.params;
    const PotentialSource src = parse_potential(p.child("potential"), run.config_dir);
    const std::int64_t L = half_width(p);
    const bool vectors = p.boolean("eigenvectors", false);
    p.finish();
    const std::uint64_t seed = src.random() ? run.need_seed() : run.seed;

    const PotentialWindow w = src.draw(L, seed);
    const EigenDecomposition e = eigen(build(w));
    write_spectrum_csv(e, run.output("spectrum.csv"));
    if (vectors) {
        csv::Writer out(run.output("eigenvectors.csv"), {"k", "n", "phi"});
        for (std::size_t k = 0; k < e.n; ++k)
            for (std::int64_t n = w.first_site; n <= w.last_site(); ++n)
                out.row({csv::format(static_cast<long long>(k + 1)),
                         csv::format(static_cast<long long>(n)), csv::format(e.phi(k, n))});
    }
    run.manifest.set("construction", src.kind);
    run.manifest.set("spec_digest", src.digest);
    run.manifest.set("tolerance.eigen_residual", e.residual_tolerance);
    run.manifest.set("result.max_residual", e.residual);
    run.manifest.set("result.reorthogonalized", static_cast<long long>(e.reorthogonalized));
}

void cmd_decay(Run& run)
{
    const Section& p = run.params;
    const PotentialSource src = parse_potential(p.child("potential"), run.config_dir);
    const std::int64_t L = half_width(p);
    const std::int64_t m = p.integer("m", 0);
    const std::int64_t trials = p.integer("trials");
    if (trials < 2)
        throw ConfigError("config: '" + p.key_path("trials") + "' must be at least 2");
    const std::int64_t retries = p.integer("max_retries", 3);
    if (retries < 0)
        throw ConfigError("config: '" + p.key_path("max_retries") + "' must be non-negative");
    std::optional<BoundParams> bound;
    if (p.has("bound")) {
        const Section b = p.child("bound");
        if (!src.scale)
            throw ConfigError("config: '" + b.path() + "' needs an iid or ks potential");
        BoundParams bp;
        bp.K0 = positive(b, "K0");
        bp.lambda = positive(b, "lambda");
        bp.c = b.has("c") ? positive(b, "c") : decay_constant(src.density, 0.01, 100.0).c;
        bp.r_sup = src.density.sup_bound();
        bp.scale = src.scale;
        if (b.has("leb_sigma0")) {
            bp.leb_sigma0 = positive(b, "leb_sigma0");
        } else {
            double B = 0.0;
            const Interval supp = src.density.support();
            const double radius = std::max(std::abs(supp.lo), std::abs(supp.hi));
            for (std::int64_t n = -L; n <= L; ++n)
                B = std::max(B, src.scale(n) * radius);
            bp.leb_sigma0 = 4.0 + 2.0 * B;
        }
        b.finish();
        bound = bp;
    }
    std::optional<std::pair<std::int64_t, std::int64_t>> fit;
    if (p.has("fit")) {
        const Section f = p.child("fit");
        fit = std::make_pair(f.integer("n_lo"), f.integer("n_hi"));
        f.finish();
    }
    p.finish();
    if (!src.random())
        throw ConfigError("config: 'params.potential.kind' must be a random construction for decay");
    if (m < -L || m > L)
        throw ConfigError("config: 'params.m' lies outside [-L, L]");

    MonteCarloOptions o;
    o.trials = static_cast<std::size_t>(trials);
    o.seed = run.need_seed();
    o.workers = run.workers;
    o.max_retries = static_cast<std::size_t>(retries);
    DecayProfile profile = rho_estimate(src.sampler(L), L, m, o);
    profile.spec_digest = src.digest;
    if (bound)
        for (DecayRow& r : profile.rows)
            if (r.n != m && m == 0)
                r.theoretical_bound = theoretical_bound(*bound, r.n);
    profile.write_csv(run.output("decay.csv"));

    run.manifest.set("construction", src.kind);
    run.manifest.set("spec_digest", src.digest);
    run.manifest.set("failures.eigensolver", static_cast<long long>(profile.failures));
    run.manifest.set("tolerance.self_correlator", 1e-10);
    if (fit) {
        const RateFit f = fit_rate(profile, fit->first, fit->second);
        run.manifest.set("result.rate", f.rate);
        run.manifest.set("result.rate_ci_low", f.ci_low);
        run.manifest.set("result.rate_ci_high", f.ci_high);
        run.manifest.set("result.r_squared", f.r_squared);
    }
}

void cmd_diophantine(Run& run)
{
    const Section& p = run.params;
    const Frequency alpha = Frequency::parse(p.string("alpha"));
    const std::int64_t k_max = positive_integer(p, "k_max");
    const std::int64_t gap_k = p.integer("gap_k", -1);
    p.finish();

    const Convergents c = continued_fraction(alpha, static_cast<std::size_t>(k_max));
    c.write_csv(run.output("convergents.csv"));
    run.manifest.set("result.terminated", c.terminated() ? "true" : "false");
    run.manifest.set("result.convergents", static_cast<long long>(c.size()));
    if (gap_k >= 0) {
        csv::Writer w(run.output("gaps.csv"), {"k", "q_k", "q_k1", "min_gap", "bound", "holds"});
        bool all = true;
        for (std::int64_t k = 0; k <= gap_k && static_cast<std::size_t>(k + 1) < c.size(); ++k) {
            const GapReport g = gap_check(c, static_cast<std::size_t>(k));
            w.row({csv::format(static_cast<long long>(k)),
                   c[static_cast<std::size_t>(k)].q.str(),
                   c[static_cast<std::size_t>(k + 1)].q.str(), csv::format(g.min_gap),
                   csv::format(g.bound), g.holds ? "true" : "false"});
            all = all && g.holds;
        }
        run.manifest.set("result.gap_bound_holds", all ? "true" : "false");
    }
}

void cmd_verify(Run& run)
{
    const Section& p = run.params;
    VerifySettings s;
    s.seed = run.need_seed();
    s.workers = run.workers;
    const std::vector<std::string> checks = p.string_list("checks");
    if (p.boolean("quick", false)) {
        s.jacobian_samples = 20;
        s.factorization_trials = 20000;
        s.factorization_quick = true;
        s.norm_energies = 3;
        s.dynamical_trials = 5;
        s.dynamical_L = 10;
        s.holder_pairs = 1000;
        s.correlator_instances = 20;
    }
    if (p.has("test_hooks")) {
        const Section h = p.child("test_hooks");
        s.wrong_sign_kernel = h.boolean("wrong_sign_kernel", false);
        h.finish();
    }
    p.finish();
    if (checks.empty())
        throw ConfigError("config: 'params.checks' is empty; nothing would be verified");
    for (const auto& c : checks)
        if (std::find(check_names().begin(), check_names().end(), c) == check_names().end())
            throw ConfigError("config: 'params.checks' names unknown check '" + c + "'");

    std::vector<CheckResult> results;
    for (const auto& name : checks) {
        CheckResult r;
        try {
            r = run_check(name, s);
        } catch (const Error& e) {
            r.name = name;
            r.passed = false;
            r.details.emplace_back("error", e.what());
        }
        if (run.log)
            *run.log << (r.passed ? "PASS " : "FAIL ") << r.name << " value=" << csv::format(r.value)
                     << " threshold=" << csv::format(r.threshold) << '\n';
        results.push_back(std::move(r));
    }

    const auto csv_path = run.output("verify.csv");
    {
        csv::Writer w(csv_path, {"check", "passed", "value", "threshold", "seconds"});
        for (const auto& r : results)
            w.row({r.name, r.passed ? "true" : "false", csv::format(r.value),
                   csv::format(r.threshold), csv::format(r.seconds)});
    }
    Manifest report;
    for (const auto& r : results) {
        report.set(r.name + ".passed", r.passed ? "true" : "false");
        report.set(r.name + ".value", r.value);
        report.set(r.name + ".threshold", r.threshold);
        report.set(r.name + ".seconds", r.seconds);
        for (const auto& [k, v] : r.details)
            report.set(r.name + "." + k, v);
    }
    report.write(run.output("verify_report.txt"));
    const bool all = std::all_of(results.begin(), results.end(),
                                 [](const CheckResult& r) { return r.passed; });
    run.manifest.set("result.all_passed", all ? "true" : "false");
    if (!all)
        run.status = kExitNumerical;
}

const std::map<std::string, std::function<void(Run&)>>& commands()
{
    static const std::map<std::string, std::function<void(Run&)>> table{
        {"sequences", cmd_sequences}, {"construct", cmd_construct},
        {"spectrum", cmd_spectrum},   {"decay", cmd_decay},
        {"verify", cmd_verify},       {"diophantine", cmd_diophantine}};
    return table;
}

void remove_outputs(const Run& run, const std::filesystem::path& manifest)
{
    std::error_code ec;
    for (const auto& p : run.outputs)
        std::filesystem::remove(p, ec);
    std::filesystem::remove(manifest, ec);
}

int classify(const std::exception& e)
{
    if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const OutOfRange*>(&e) ||
        dynamic_cast<const SpecViolation*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
        return kExitValidation;
    return kExitNumerical;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Numerical laboratory for Kunz-Souillard localization"};
    std::string config_path;
    std::string out_flag;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required();
    app.add_option("--out", out_flag, "Output directory");
    app.add_option("--seed", seed_flag, "Master seed; overrides the config seed");
    app.set_version_flag("--version", kArtifactVersion);
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    Json config;
    {
        std::ifstream in(config_path);
        if (!in) {
            err << "error: cannot read config " << config_path << '\n';
            return kExitValidation;
        }
        try {
            config = Json::parse(in);
        } catch (const Json::parse_error& e) {
            err << "error: config is not valid JSON: " << e.what() << '\n';
            return kExitValidation;
        }
    }

    std::optional<Run> run;
    std::filesystem::path manifest_path;
    try {
        Section root(config, "");
        const std::int64_t version = root.integer("schema_version");
        if (version != kSchemaVersion)
            throw ConfigError("config: 'schema_version' must be " + std::to_string(kSchemaVersion));
        const std::string sub = root.string("subcommand");
        const auto it = commands().find(sub);
        if (it == commands().end())
            throw ConfigError("config: 'subcommand' must be one of sequences, construct, "
                              "spectrum, decay, verify, diophantine");
        std::uint64_t seed = 0;
        bool has_seed = false;
        if (root.has("seed")) {
            seed = root.unsigned_integer("seed");
            has_seed = true;
        }
        const std::int64_t workers = positive_integer(root, "workers", 1);
        std::string out_dir = root.string("output", "");
        if (const char* env = std::getenv("KSLAB_OUT"); env && *env)
            out_dir = env;
        if (!out_flag.empty())
            out_dir = out_flag;
        if (out_dir.empty())
            out_dir = "out";
        Section params = root.child("params");
        root.finish();

        run.emplace(Run{root, params, out_dir,
                        std::filesystem::absolute(config_path).parent_path(), seed, has_seed,
                        static_cast<std::size_t>(workers), {}, {}, &out, kExitOk});
        if (seed_flag) {
            run->seed = *seed_flag;
            run->has_seed = true;
        }
        std::filesystem::create_directories(run->out_dir);
        manifest_path = run->out_dir / "manifest.txt";

        Manifest& m = run->manifest;
        m.set("artifact_version", kArtifactVersion);
        m.set("schema_version", static_cast<long long>(version));
        m.set("subcommand", sub);
        m.set("config_path", config_path);
        m.set("config_sha256", sha256_file(config_path));
        m.set("config", config.dump());
        m.set("seed", run->has_seed ? std::to_string(run->seed) : std::string("none"));
        m.set("seed_source", seed_flag ? "flag" : (has_seed ? "config" : "none"));
        m.set("workers", static_cast<long long>(run->workers));
        m.set("start_time", utc_now());

        it->second(*run);

        m.set("end_time", utc_now());
        for (const auto& p : run->outputs)
            m.add_file(p);
        m.set("status", static_cast<long long>(run->status));
        m.write(manifest_path);
        for (const auto& p : run->outputs)
            out << "wrote " << p.string() << '\n';
        return run->status;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        if (run)
            remove_outputs(*run, manifest_path);
        return classify(e);
    }
}

}  // namespace kslab::cli

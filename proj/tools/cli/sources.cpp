#include "sources.hpp"

#include "manifest.hpp"

#include <cmath>
#include <numbers>

namespace kslab::cli {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

PotentialWindow slice(const PotentialWindow& w, std::int64_t L)
{
    if (!w.contains(-L) || !w.contains(L))
        throw OutOfRange("potential file does not cover [-" + std::to_string(L) + ", " +
                         std::to_string(L) + "]");
    PotentialWindow out = w;
    out.first_site = -L;
    out.values.clear();
    for (std::int64_t n = -L; n <= L; ++n)
        out.values.push_back(w.at(n));
    return out;
}

std::function<double(std::int64_t)> parse_scale(const Section& s)
{
    const Json& v = s.raw("scale");
    if (v.is_number()) {
        const double a = positive(s, "scale");
        return [a](std::int64_t) { return a; };
    }
    const Section r = s.child("scale");
    const std::string kind = r.string("kind");
    if (kind == "constant") {
        const double a = positive(r, "a");
        r.finish();
        return [a](std::int64_t) { return a; };
    }
    if (kind == "power") {
        const double C = positive(r, "C");
        const double alpha = r.number("alpha");
        r.finish();
        return [C, alpha](std::int64_t n) {
            return C * std::pow(1.0 + std::abs(static_cast<double>(n)), -alpha);
        };
    }
    throw ConfigError("config: '" + r.key_path("kind") + "' must be constant or power");
}

double frequency_value(const Section& s, const std::string& key)
{
    const Json& v = s.raw(key);
    if (v.is_string())
        return Frequency::parse(v.get<std::string>()).to_double();
    return s.number(key);
}

/// Background chi as a function of the circle point x = theta + n alpha.
struct Cosine {
    double lambda = 0.0;
    double alpha = 0.0;
    double theta = 0.0;
};

std::optional<Cosine> parse_background(const Section& s)
{
    if (!s.has("background"))
        return std::nullopt;
    const Section b = s.child("background");
    const std::string kind = b.string("kind");
    if (kind == "zero") {
        b.finish();
        return std::nullopt;
    }
    if (kind == "cosine") {
        Cosine c;
        c.lambda = b.number("lambda");
        c.alpha = b.has("alpha") ? frequency_value(b, "alpha") : 0.0;
        c.theta = b.number("theta", 0.0);
        b.finish();
        return c;
    }
    throw ConfigError("config: '" + b.key_path("kind") + "' must be zero or cosine");
}

std::function<LinearFunctional(std::int64_t)> parse_functional(const Section& s)
{
    if (!s.has("functional"))
        return {};
    const Section f = s.child("functional");
    const std::string kind = f.string("kind");
    if (kind == "none") {
        f.finish();
        return {};
    }
    const double b = f.number("b");
    f.finish();
    if (kind == "previous")
        return [b](std::int64_t n) {
            LinearFunctional L;
            if (n != 0)
                L.coefficients[n > 0 ? n - 1 : n + 1] = b;
            return L;
        };
    if (kind == "origin")
        return [b](std::int64_t n) {
            LinearFunctional L;
            if (n != 0)
                L.coefficients[0] = b;
            return L;
        };
    throw ConfigError("config: '" + f.key_path("kind") + "' must be none, previous or origin");
}

}  // namespace

Density parse_density(const Section& parent, const std::string& key,
                      const std::filesystem::path& base_dir)
{
    if (!parent.has(key))
        return Density::uniform();
    const Json& v = parent.raw(key);
    if (v.is_string()) {
        if (v.get<std::string>() != "uniform")
            throw ConfigError("config: '" + parent.key_path(key) +
                              "' must be \"uniform\" or an object");
        return Density::uniform();
    }
    const Section d = parent.child(key);
    if (d.has("file")) {
        const auto path = resolve(base_dir, d.string("file"));
        d.finish();
        return Density::load(path);
    }
    const Json& t = d.raw("table");
    std::vector<std::pair<double, double>> table;
    if (!t.is_array())
        throw ConfigError("config: '" + d.key_path("table") + "' must be a list of [x, r(x)]");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_array() || t[i].size() != 2 || !t[i][0].is_number() || !t[i][1].is_number())
            throw ConfigError("config: '" + d.key_path("table") + "[" + std::to_string(i) +
                              "]' must be a pair of numbers");
        table.emplace_back(t[i][0].get<double>(), t[i][1].get<double>());
    }
    d.finish();
    return Density::tabulated(std::move(table));
}

PotentialSource parse_potential(const Section& s, const std::filesystem::path& base_dir)
{
    PotentialSource src;
    src.kind = s.string("kind");
    src.digest = sha256_text(s.json().dump());
    if (src.kind == "zero") {
    } else if (src.kind == "file") {
        src.file = PotentialWindow::read_csv(resolve(base_dir, s.string("path")));
    } else if (src.kind == "iid") {
        src.density = parse_density(s, "density", base_dir);
        src.iid_scale = positive(s, "scale", 1.0);
        const double a = src.iid_scale;
        src.scale = [a](std::int64_t) { return a; };
    } else if (src.kind == "ks") {
        KsSpec spec;
        spec.density = parse_density(s, "density", base_dir);
        src.density = spec.density;
        if (s.has("scale"))
            spec.scale = parse_scale(s);
        if (auto c = parse_background(s)) {
            const Cosine cc = *c;
            spec.background = [cc](std::int64_t n) {
                return cc.lambda *
                       std::cos(2.0 * std::numbers::pi * (cc.theta + static_cast<double>(n) * cc.alpha));
            };
        }
        spec.functional = parse_functional(s);
        if (s.has("plus_bound"))
            spec.plus_bound = positive(s, "plus_bound");
        src.scale = spec.scale;
        src.ks = std::move(spec);
    } else if (src.kind == "limit_periodic") {
        LimitPeriodicSpec spec;
        spec.eps = positive(s, "eps", spec.eps);
        spec.gamma = positive(s, "gamma", spec.gamma);
        const std::int64_t levels = s.integer("levels", static_cast<std::int64_t>(spec.levels));
        if (levels < 0)
            throw ConfigError("config: '" + s.key_path("levels") + "' must be non-negative");
        spec.levels = static_cast<std::size_t>(levels);
        spec.depth =
            static_cast<std::size_t>(positive_integer(s, "depth", static_cast<std::int64_t>(spec.depth)));
        spec.density = parse_density(s, "density", base_dir);
        src.density = spec.density;
        src.limit_periodic = std::move(spec);
    } else if (src.kind == "qp_bump") {
        QpBumpSpec spec;
        if (s.has("alpha"))
            spec.alpha = Frequency::parse(s.string("alpha"));
        spec.omega = s.number("omega", 0.0);
        spec.eps = positive(s, "eps", spec.eps);
        spec.exponent = s.number("exponent", spec.exponent);
        if (auto c = parse_background(s)) {
            const Cosine cc = *c;
            spec.background = [cc](double x) {
                return cc.lambda * std::cos(2.0 * std::numbers::pi * (cc.theta + x));
            };
            spec.background_sup = std::abs(cc.lambda);
        }
        src.qp_bump = std::move(spec);
    } else {
        throw ConfigError("config: '" + s.key_path("kind") +
                          "' must be one of zero, file, iid, ks, limit_periodic, qp_bump");
    }
    s.finish();
    return src;
}

PotentialWindow PotentialSource::draw(std::int64_t L, std::uint64_t seed) const
{
    if (kind == "zero")
        return PotentialWindow::zero(L);
    if (kind == "file")
        return slice(*file, L);
    if (kind == "iid")
        return iid_sampler(density, iid_scale, L)(seed);
    if (kind == "ks")
        return sample_ks_potential(*ks, L, seed).window;
    if (kind == "limit_periodic")
        return limit_periodic_potential(*limit_periodic, L, seed).window;
    return qp_bump_potential(*qp_bump, L, seed).window;
}

WindowSampler PotentialSource::sampler(std::int64_t L) const
{
    if (kind == "iid")
        return iid_sampler(density, iid_scale, L);
    if (kind == "ks")
        return ks_sampler(*ks, L);
    const PotentialSource self = *this;
    return [self, L](std::uint64_t key) { return self.draw(L, key); };
}

}  // namespace kslab::cli

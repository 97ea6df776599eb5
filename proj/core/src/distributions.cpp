#include "kslab/distributions.hpp"

#include "kslab/error.hpp"
#include "kslab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>

namespace kslab {

Density Density::uniform()
{
    return Density{};
}

Density Density::tabulated(std::vector<std::pair<double, double>> nodes)
{
    if (nodes.size() < 2)
        throw InvalidArgument("tabulated density needs at least two nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto [x, y] = nodes[i];
        if (!std::isfinite(x) || !std::isfinite(y))
            throw InvalidArgument("tabulated density has non-finite entries");
        if (y < 0.0)
            throw InvalidArgument("tabulated density has a negative value at x = " +
                                  std::to_string(x));
        if (i > 0 && !(x > nodes[i - 1].first))
            throw InvalidArgument("tabulated density abscissae must be strictly increasing");
    }

    auto table = std::make_shared<Table>();
    table->cumulative.resize(nodes.size());
    table->cumulative[0] = 0.0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const double h = nodes[i].first - nodes[i - 1].first;
        table->cumulative[i] =
            table->cumulative[i - 1] + 0.5 * h * (nodes[i].second + nodes[i - 1].second);
    }
    const double total = table->cumulative.back();
    if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "tabulated density integrates to " << total << ", not 1 within 1e-9";
        throw InvalidArgument(msg.str());
    }

    Density d;
    d.kind_ = Kind::tabulated;
    d.support_ = {nodes.front().first, nodes.back().first};
    d.sup_bound_ = 0.0;
    for (const auto& node : nodes)
        d.sup_bound_ = std::max(d.sup_bound_, node.second);
    table->nodes = std::move(nodes);
    d.table_ = std::move(table);
    return d;
}

Density Density::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot open density table " + path.string());
    std::vector<std::pair<double, double>> nodes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream fields(line);
        double x = 0.0;
        double y = 0.0;
        if (!(fields >> x))
            continue;
        if (!(fields >> y))
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected two columns");
        nodes.emplace_back(x, y);
    }
    return tabulated(std::move(nodes));
}

std::span<const std::pair<double, double>> Density::table() const noexcept
{
    if (!table_)
        return {};
    return table_->nodes;
}

double Density::evaluate(double x) const noexcept
{
    if (x < support_.lo || x > support_.hi)
        return 0.0;
    if (kind_ == Kind::uniform)
        return 1.0;
    const auto& nodes = table_->nodes;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x,
                               [](double v, const auto& node) { return v < node.first; });
    if (it == nodes.end())
        return nodes.back().second;
    const auto& right = *it;
    const auto& left = *(it - 1);
    const double t = (x - left.first) / (right.first - left.first);
    return left.second + t * (right.second - left.second);
}

double Density::cdf(double x) const noexcept
{
    if (x <= support_.lo)
        return 0.0;
    if (x >= support_.hi)
        return 1.0;
    if (kind_ == Kind::uniform)
        return x;
    const auto& nodes = table_->nodes;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x,
                               [](double v, const auto& node) { return v < node.first; });
    const std::size_t i = static_cast<std::size_t>(it - nodes.begin()) - 1;
    const double h = nodes[i + 1].first - nodes[i].first;
    const double slope = (nodes[i + 1].second - nodes[i].second) / h;
    const double t = x - nodes[i].first;
    return std::min(1.0, table_->cumulative[i] + nodes[i].second * t + 0.5 * slope * t * t);
}

double Density::quantile(double u) const noexcept
{
    if (kind_ == Kind::uniform)
        return std::clamp(u, 0.0, 1.0);
    const auto& nodes = table_->nodes;
    const auto& cum = table_->cumulative;
    const double target = std::clamp(u, 0.0, 1.0) * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), target);
    if (it == cum.end())
        return support_.hi;
    std::size_t i = static_cast<std::size_t>(it - cum.begin());
    i = i == 0 ? 0 : i - 1;
    const double h = nodes[i + 1].first - nodes[i].first;
    const double y0 = nodes[i].second;
    const double slope = (nodes[i + 1].second - y0) / h;
    const double delta = target - cum[i];
    // Solve 0.5 slope t^2 + y0 t = delta in its cancellation-free form.
    const double disc = std::max(0.0, y0 * y0 + 2.0 * slope * delta);
    const double denom = y0 + std::sqrt(disc);
    double t = denom > 0.0 ? 2.0 * delta / denom : 0.0;
    t = std::clamp(t, 0.0, h);
    return nodes[i].first + t;
}

double Density::fourier_sq(double k) const
{
    if (kind_ == Kind::uniform) {
        const double half = 0.5 * k;
        if (std::abs(half) < 1e-8)
            return 1.0 - k * k / 12.0;
        const double s = std::sin(half) / half;
        return s * s;
    }
    const auto& nodes = table_->nodes;
    const auto& rule = numerics::gauss_legendre(8);
    std::complex<double> total{0.0, 0.0};
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i].first;
        const double b = nodes[i + 1].first;
        const double ya = nodes[i].second;
        const double yb = nodes[i + 1].second;
        const int panels = 1 + static_cast<int>(std::abs(k) * (b - a));
        const double ph = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * ph;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double x = mid + 0.5 * ph * rule.nodes[q];
                const double y = ya + (yb - ya) * (x - a) / (b - a);
                total += 0.5 * ph * rule.weights[q] * y * std::polar(1.0, k * x);
            }
        }
    }
    return std::min(1.0, std::norm(total));
}

std::vector<double> Density::knots() const
{
    if (kind_ == Kind::uniform)
        return {0.0, 1.0};
    std::vector<double> out;
    for (const auto& node : table_->nodes)
        out.push_back(node.first);
    return out;
}

std::string Density::describe() const
{
    if (kind_ == Kind::uniform)
        return "uniform[0,1]";
    std::ostringstream out;
    out << "tabulated(" << table_->nodes.size() << " nodes on [" << support_.lo << ", "
        << support_.hi << "])";
    return out.str();
}

ScaledDensity::ScaledDensity(Density base, double scale) : base_(std::move(base)), scale_(scale)
{
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw InvalidArgument("density scale must be positive and finite");
}

std::vector<double> ScaledDensity::knots() const
{
    auto k = base_.knots();
    for (double& x : k)
        x *= scale_;
    return k;
}

ScaledDensity rescale(const Density& d, double a)
{
    return ScaledDensity(d, a);
}

namespace {

struct DecayGrid {
    std::vector<double> lambdas;
    std::vector<double> suffix_sup;  // sup of |r^|^2 over grid points >= lambda_i
};

DecayGrid decay_grid(const Density& d, double lambda, double k_max, std::size_t n)
{
    DecayGrid g;
    g.lambdas = numerics::log_grid(lambda, k_max, n);
    g.suffix_sup.resize(n);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        running = std::max(running, d.fourier_sq(g.lambdas[i]));
        g.suffix_sup[i] = running;
    }
    return g;
}

}  // namespace

DecayConstant decay_constant(const Density& d, double lambda, double k_max,
                             std::size_t grid_points)
{
    if (!(lambda > 0.0) || !(k_max > lambda))
        throw InvalidArgument("decay_constant requires 0 < lambda < k_max");
    if (grid_points < 2)
        throw InvalidArgument("decay_constant requires at least two grid points");

    const DecayGrid g = decay_grid(d, lambda, k_max, grid_points);
    DecayConstant out;
    out.lambda = lambda;
    out.k_max = k_max;
    out.grid_points = grid_points;
    out.grid_ratio = g.lambdas[1] / g.lambdas[0];
    out.c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double l = g.lambdas[i];
        const double sup = g.suffix_sup[i];
        const double ci = sup > 0.0 ? -std::log(sup) / (l * l)
                                    : std::numeric_limits<double>::infinity();
        if (ci < out.c) {
            out.c = ci;
            out.binding_lambda = l;
        }
    }
    if (!(out.c > 0.0) || !std::isfinite(out.c))
        throw NumericalFailure("decay_constant: no positive c satisfies the Fourier bound on "
                               "the grid (bad density table?)");
    return out;
}

bool decay_constant_holds(const Density& d, const DecayConstant& dc)
{
    const DecayGrid g = decay_grid(d, dc.lambda, dc.k_max, dc.grid_points);
    for (std::size_t i = 0; i < dc.grid_points; ++i) {
        const double l = g.lambdas[i];
        if (g.suffix_sup[i] > std::exp(-dc.c * l * l) * (1.0 + 1e-12))
            return false;
    }
    return true;
}

}  // namespace kslab

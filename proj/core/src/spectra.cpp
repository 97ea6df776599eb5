#include "kslab/spectra.hpp"

#include "kslab/csv.hpp"
#include "kslab/error.hpp"
#include "kslab/potentials.hpp"
#include "kslab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kslab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kPivMin = std::numeric_limits<double>::min() * 4.0;
constexpr double kClusterGap = 1e-3;
constexpr int kMaxInverseIterations = 8;

/// LU factorisation with partial pivoting of T - shift I (unit off-diagonals).
class ShiftedFactor {
public:
    ShiftedFactor(std::span<const double> diag, double shift, double perturbation)
        : n_(diag.size()), d_(n_), du_(n_ > 1 ? n_ - 1 : 0, 1.0), du2_(n_ > 2 ? n_ - 2 : 0, 0.0),
          dl_(n_ > 1 ? n_ - 1 : 0, 1.0), swapped_(n_ > 1 ? n_ - 1 : 0, false)
    {
        for (std::size_t i = 0; i < n_; ++i)
            d_[i] = diag[i] - shift;
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (std::abs(d_[i]) >= std::abs(dl_[i])) {
                if (d_[i] == 0.0)
                    d_[i] = perturbation;
                const double fact = dl_[i] / d_[i];
                dl_[i] = fact;
                d_[i + 1] -= fact * du_[i];
            } else {
                const double fact = d_[i] / dl_[i];
                d_[i] = dl_[i];
                dl_[i] = fact;
                const double temp = du_[i];
                du_[i] = d_[i + 1];
                d_[i + 1] = temp - fact * d_[i + 1];
                if (i + 2 < n_) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -fact * du_[i + 1];
                }
                swapped_[i] = true;
            }
        }
        for (double& v : d_)
            if (v == 0.0)
                v = perturbation;
    }

    void solve(std::span<double> b) const
    {
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (swapped_[i])
                std::swap(b[i], b[i + 1]);
            b[i + 1] -= dl_[i] * b[i];
        }
        b[n_ - 1] /= d_[n_ - 1];
        if (n_ > 1)
            b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / d_[n_ - 2];
        for (std::size_t i = n_ >= 3 ? n_ - 3 + 1 : 0; i-- > 0;)
            b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    }

private:
    std::size_t n_;
    std::vector<double> d_, du_, du2_, dl_;
    std::vector<bool> swapped_;
};

double norm2(std::span<const double> x)
{
    double scale = 0.0;
    for (double v : x)
        scale = std::max(scale, std::abs(v));
    if (scale == 0.0)
        return 0.0;
    double s = 0.0;
    for (double v : x) {
        const double r = v / scale;
        s += r * r;
    }
    return scale * std::sqrt(s);
}

double residual_inf(const TridiagonalOperator& op, std::span<const double> x, double lambda)
{
    const auto d = op.diag();
    const std::size_t n = d.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = (d[i] - lambda) * x[i];
        if (i > 0)
            y += x[i - 1];
        if (i + 1 < n)
            y += x[i + 1];
        worst = std::max(worst, std::abs(y));
    }
    return worst;
}

}  // namespace

TridiagonalOperator::TridiagonalOperator(std::vector<double> diag, std::int64_t first_site)
    : diag_(std::move(diag)), first_site_(first_site)
{
    if (diag_.empty())
        throw InvalidArgument("TridiagonalOperator: empty window");
    for (double v : diag_) {
        if (!std::isfinite(v))
            throw InvalidArgument("TridiagonalOperator: non-finite potential value");
        potential_sup_ = std::max(potential_sup_, std::abs(v));
    }
}

void TridiagonalOperator::apply(std::span<const double> x, std::span<double> y) const
{
    const std::size_t n = diag_.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = diag_[i] * x[i];
        if (i > 0)
            v += x[i - 1];
        if (i + 1 < n)
            v += x[i + 1];
        y[i] = v;
    }
}

TridiagonalOperator build(const PotentialWindow& w)
{
    return TridiagonalOperator(w.values, w.first_site);
}

std::size_t EigenDecomposition::index_of(std::int64_t site) const
{
    const std::int64_t i = site - first_site;
    if (i < 0 || i >= static_cast<std::int64_t>(n))
        throw OutOfRange("site " + std::to_string(site) + " outside the window");
    return static_cast<std::size_t>(i);
}

std::size_t sturm_count(std::span<const double> diag, double x)
{
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        q = (diag[i] - x) - (i == 0 ? 0.0 : 1.0 / q);
        if (std::abs(q) < kPivMin)
            q = -kPivMin;
        if (q < 0.0)
            ++count;
    }
    return count;
}

EigenDecomposition eigen(const TridiagonalOperator& op)
{
    const auto diag = op.diag();
    const std::size_t n = diag.size();
    EigenDecomposition e;
    e.n = n;
    e.first_site = op.first_site();
    e.eigenvalues.resize(n);
    e.vectors.assign(n * n, 0.0);
    e.residual_tolerance = 1e-10 * (1.0 + op.potential_sup());

    if (n == 1) {
        e.eigenvalues[0] = diag[0];
        e.vectors[0] = 1.0;
        return e;
    }

    const auto [dmin, dmax] = std::minmax_element(diag.begin(), diag.end());
    const double gl = *dmin - 2.0;
    const double gu = *dmax + 2.0;
    const double scale = std::max(std::abs(gl), std::abs(gu));
    const double tol = 4.0 * kEps * scale;

    // Bisection; every Sturm count tightens the brackets of all later indices.
    std::vector<double> lo(n, gl), hi(n, gu);
    for (std::size_t j = 0; j < n; ++j) {
        while (hi[j] - lo[j] > tol) {
            const double mid = 0.5 * (lo[j] + hi[j]);
            if (mid <= lo[j] || mid >= hi[j])
                break;
            const std::size_t c = sturm_count(diag, mid);
            for (std::size_t i = j; i < n; ++i) {
                if (i < c)
                    hi[i] = std::min(hi[i], mid);
                else
                    lo[i] = std::max(lo[i], mid);
            }
        }
        e.eigenvalues[j] = 0.5 * (lo[j] + hi[j]);
    }
    for (std::size_t j = 1; j < n; ++j)
        e.eigenvalues[j] = std::max(e.eigenvalues[j], e.eigenvalues[j - 1]);

    // Inverse iteration.
    const double perturbation = kEps * scale;
    const double converged = 16.0 * kEps * scale * std::sqrt(static_cast<double>(n));
    std::size_t cluster_start = 0;
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lambda = e.eigenvalues[j];
        if (j > 0 && lambda - e.eigenvalues[j - 1] >= kClusterGap * scale)
            cluster_start = j;

        const ShiftedFactor factor(diag, lambda, perturbation);
        rng::Stream start(rng::derive(0x5eed, {static_cast<std::int64_t>(j)}));
        for (double& v : x)
            v = 2.0 * start.uniform() - 1.0;

        double res = std::numeric_limits<double>::infinity();
        for (int it = 0; it < kMaxInverseIterations; ++it) {
            factor.solve(x);
            for (int pass = 0; pass < 2 && cluster_start < j; ++pass) {
                for (std::size_t k = cluster_start; k < j; ++k) {
                    const auto v = e.vector(k);
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        dot += v[i] * x[i];
                    for (std::size_t i = 0; i < n; ++i)
                        x[i] -= dot * v[i];
                }
            }
            const double nrm = norm2(x);
            if (!(nrm > 0.0) || !std::isfinite(nrm))
                break;
            for (double& v : x)
                v /= nrm;
            res = residual_inf(op, x, lambda);
            if (it >= 1 && res <= converged)
                break;
        }
        if (cluster_start < j)
            ++e.reorthogonalized;

        // Deterministic sign: largest-magnitude component positive.
        std::size_t big = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(x[i]) > std::abs(x[big]))
                big = i;
        const double sign = x[big] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            e.vectors[j * n + i] = sign * x[i];
        e.residual = std::max(e.residual, res);
    }

    if (!(e.residual <= e.residual_tolerance)) {
        std::ostringstream msg;
        msg << "eigen: residual " << e.residual << " exceeds tolerance " << e.residual_tolerance
            << " (n = " << n << ", ||V|| = " << op.potential_sup()
            << ", reorthogonalized = " << e.reorthogonalized << ")";
        throw NumericalFailure(msg.str());
    }
    return e;
}

std::complex<double> amplitude(const EigenDecomposition& e, std::int64_t n, std::int64_t m,
                               double t)
{
    const std::size_t in = e.index_of(n);
    const std::size_t im = e.index_of(m);
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t k = 0; k < e.n; ++k)
        sum += std::polar(e.vectors[k * e.n + in] * e.vectors[k * e.n + im],
                          -t * e.eigenvalues[k]);
    return sum;
}

double correlator(const EigenDecomposition& e, std::int64_t n, std::int64_t m)
{
    const std::size_t in = e.index_of(n);
    const std::size_t im = e.index_of(m);
    double sum = 0.0;
    for (std::size_t k = 0; k < e.n; ++k)
        sum += std::abs(e.vectors[k * e.n + in]) * std::abs(e.vectors[k * e.n + im]);
    return sum;
}

std::vector<double> correlator_row(const EigenDecomposition& e, std::int64_t m)
{
    const std::size_t im = e.index_of(m);
    std::vector<double> row(e.n, 0.0);
    for (std::size_t k = 0; k < e.n; ++k) {
        const double* v = e.vectors.data() + k * e.n;
        const double w = std::abs(v[im]);
        for (std::size_t i = 0; i < e.n; ++i)
            row[i] += std::abs(v[i]) * w;
    }
    return row;
}

OrthonormalityReport check_orthonormality(const EigenDecomposition& e)
{
    OrthonormalityReport r;
    for (std::size_t k = 0; k < e.n; ++k) {
        const auto a = e.vector(k);
        double nn = 0.0;
        for (double v : a)
            nn += v * v;
        r.max_norm_error = std::max(r.max_norm_error, std::abs(std::sqrt(nn) - 1.0));
        for (std::size_t l = k + 1; l < e.n; ++l) {
            const auto b = e.vector(l);
            double dot = 0.0;
            for (std::size_t i = 0; i < e.n; ++i)
                dot += a[i] * b[i];
            r.max_overlap = std::max(r.max_overlap, std::abs(dot));
        }
        if (k > 0 && !(e.eigenvalues[k] > e.eigenvalues[k - 1]))
            r.strictly_ordered = false;
    }
    return r;
}

void write_spectrum_csv(const EigenDecomposition& e, const std::filesystem::path& path)
{
    csv::Writer out(path, {"k", "E"});
    for (std::size_t k = 0; k < e.n; ++k)
        out.row({std::to_string(k + 1), csv::format(e.eigenvalues[k])});
}

}  // namespace kslab

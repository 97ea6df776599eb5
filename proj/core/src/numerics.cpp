#include "kslab/numerics.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <map>
#include <mutex>

namespace kslab::numerics {

const GaussRule& gauss_legendre(int n)
{
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;

    GaussRule rule;
    // legendre_p_zeros returns the nonnegative zeros in increasing order.
    const auto zeros = boost::math::legendre_p_zeros<double>(n);
    for (double z : zeros) {
        const double dp = boost::math::legendre_p_prime<double>(n, z);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes.push_back(z);
        rule.weights.push_back(w);
        if (z != 0.0) {
            rule.nodes.push_back(-z);
            rule.weights.push_back(w);
        }
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n)
{
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double llo = std::log(lo);
    const double step = (std::log(hi) - llo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::exp(llo + step * static_cast<double>(i));
    out.back() = hi;
    return out;
}

}  // namespace kslab::numerics

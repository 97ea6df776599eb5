#include "kslab/distributions.hpp"
#include "kslab/ksoperators.hpp"
#include "kslab/localization.hpp"
#include "kslab/potentials.hpp"
#include "kslab/spectra.hpp"

#include <benchmark/benchmark.h>

using namespace kslab;

namespace {

void BM_Eigen(benchmark::State& state)
{
    const auto L = static_cast<std::int64_t>(state.range(0));
    const PotentialWindow w = iid_sampler(Density::uniform(), 2.0, L)(7);
    const TridiagonalOperator op = build(w);
    for (auto _ : state)
        benchmark::DoNotOptimize(eigen(op));
    state.SetComplexityN(2 * L + 1);
}
BENCHMARK(BM_Eigen)->Arg(10)->Arg(30)->Arg(100)->Arg(250)->Complexity();

void BM_RhoEstimate(benchmark::State& state)
{
    const auto sampler = iid_sampler(Density::uniform(), 1.0, 30);
    MonteCarloOptions o;
    o.trials = static_cast<std::size_t>(state.range(0));
    o.seed = 42;
    for (auto _ : state)
        benchmark::DoNotOptimize(rho_estimate(sampler, 30, 0, o));
}
BENCHMARK(BM_RhoEstimate)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_BuildT(benchmark::State& state)
{
    const auto cells = static_cast<std::size_t>(state.range(0));
    const GridSpec g = GridSpec::covering(1e-3, 1e3, cells, {0.0, 0.0}, {0.0, 1.0}, 0.1);
    const ScaledDensity d = rescale(Density::uniform(), 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(build_T(d, 0.0, g));
}
BENCHMARK(BM_BuildT)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_NormT22(benchmark::State& state)
{
    const GridSpec g = GridSpec::covering(1e-3, 1e3, 2000, {0.0, 0.0}, {0.0, 1.0}, 0.1);
    const OperatorMatrix T = build_T(rescale(Density::uniform(), 1.0), 0.0, g);
    for (auto _ : state)
        benchmark::DoNotOptimize(op_norm(T, 2, 2));
}
BENCHMARK(BM_NormT22)->Unit(benchmark::kMillisecond);

void BM_FactorizationIntegral(benchmark::State& state)
{
    FactorizationOptions o;
    o.order = static_cast<int>(state.range(0));
    o.splits = 1;
    o.energy_pieces = 4;
    const KsSpec spec;
    for (auto _ : state)
        benchmark::DoNotOptimize(factorization_integral(spec, 1, 1, o, true));
}
BENCHMARK(BM_FactorizationIntegral)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

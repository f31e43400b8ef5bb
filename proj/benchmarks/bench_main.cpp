#include <benchmark/benchmark.h>

#include "gapflow/aux_expansion.hpp"
#include "gapflow/singular_elliptic.hpp"
#include "gapflow/stokes_fd.hpp"

using namespace gapflow;

static void BM_ChainBuild(benchmark::State& state) {
    const int alpha = static_cast<int>(state.range(0));
    auto disk = make_disk(GapGeometry::asymmetric_default(1e-3), 512, 8);
    for (auto _ : state) benchmark::DoNotOptimize(build_chain(disk, alpha, alpha == 3 ? 2 : 3));
}
BENCHMARK(BM_ChainBuild)->DenseRange(1, 6)->Unit(benchmark::kMillisecond);

static void BM_SymmetricChain(benchmark::State& state) {
    auto disk = make_disk(GapGeometry::symmetric_default(1e-3), 512, 8);
    for (auto _ : state) benchmark::DoNotOptimize(build_symmetric_chain(disk, 1, 4));
}
BENCHMARK(BM_SymmetricChain)->Unit(benchmark::kMillisecond);

static void BM_EllipticSolve(benchmark::State& state) {
    const double eps = 1e-3;
    SingularEllipticProblem p;
    p.disk = make_disk(GapGeometry::symmetric_default(eps), static_cast<int>(state.range(0)), 8);
    p.gamma = -2.5;
    p.rhs = CoeffField::from_radial_function(p.disk, 1, false, [=](double r) { return r * std::pow(eps + r * r, -3.0); });
    for (auto _ : state) benchmark::DoNotOptimize(solve(p));
}
BENCHMARK(BM_EllipticSolve)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_ResidualLadder(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(residual_ladder(
            [](double e) { return build_chain(make_disk(GapGeometry::asymmetric_default(e), 512, 8), 1, 3); },
            default_ladder_eps()));
}
BENCHMARK(BM_ResidualLadder)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_StokesSolve(benchmark::State& state) {
    StokesGrid g{static_cast<int>(state.range(0)), 32, static_cast<int>(state.range(1))};
    auto p = model_problem(3, 1e-2, g);
    for (auto _ : state) benchmark::DoNotOptimize(solve(p));
}
BENCHMARK(BM_StokesSolve)->Args({24, 8})->Args({48, 16})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

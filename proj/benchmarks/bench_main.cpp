// Microbenchmarks for the block-compression kernels and the full solver.
// Sizes are kept small enough that a full sweep finishes in a few minutes
// on one core; pass --benchmark_filter to run a subset.
#include <benchmark/benchmark.h>

#include <random>

#include "acr/acr.hpp"
#include "acr/discretize.hpp"

namespace {

using namespace acr;

Eigen::VectorXd random_vector(int n, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = dist(gen);
    return v;
}

HMatrix plane_hmatrix(int side, double eps) {
    auto block = poisson2d_block(side);
    auto tree = std::make_shared<ClusterTree>(block.coords(), 32);
    BlockClusterTree bct(tree, 2.0, Admissibility::Standard);
    return compress_sparse(block, bct, eps);
}

void BM_compress(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    auto block = poisson2d_block(side);
    auto tree = std::make_shared<ClusterTree>(block.coords(), 32);
    BlockClusterTree bct(tree, 2.0, Admissibility::Standard);
    for (auto _ : state) benchmark::DoNotOptimize(compress_sparse(block, bct, 1e-4));
    state.SetComplexityN(side * side);
}
BENCHMARK(BM_compress)->Arg(16)->Arg(32)->Arg(64)->Complexity();

void BM_hmatvec(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    HMatrix H = plane_hmatrix(side, 1e-4);
    Eigen::VectorXd x = random_vector(side * side, 1);
    for (auto _ : state) benchmark::DoNotOptimize(hmatvec(H, x));
    state.SetComplexityN(side * side);
}
BENCHMARK(BM_hmatvec)->Arg(16)->Arg(32)->Arg(64)->Complexity();

void BM_hinvert(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    HMatrix H = plane_hmatrix(side, 1e-4);
    for (auto _ : state) benchmark::DoNotOptimize(hinvert(H, 1e-4));
    state.SetComplexityN(side * side);
}
BENCHMARK(BM_hinvert)->Arg(16)->Arg(32)->Complexity();

void BM_hmultiply(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    HMatrix H = plane_hmatrix(side, 1e-4);
    for (auto _ : state) benchmark::DoNotOptimize(hmultiply(H, H, 1e-4));
    state.SetComplexityN(side * side);
}
BENCHMARK(BM_hmultiply)->Arg(16)->Arg(32)->Complexity();

void BM_factor(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto sys = assemble_poisson(n);
    AcrConfig cfg;
    cfg.eps = 1e-3;
    for (auto _ : state) benchmark::DoNotOptimize(acr_factor(sys, cfg));
    state.SetComplexityN(long(n) * n * n);
}
BENCHMARK(BM_factor)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond)->Complexity();

void BM_solve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto sys = assemble_poisson(n);
    AcrConfig cfg;
    cfg.eps = 1e-3;
    auto fact = acr_factor(sys, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(fact.solve(sys.rhs()));
    state.SetComplexityN(long(n) * n * n);
}
BENCHMARK(BM_solve)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond)->Complexity();

} // namespace

BENCHMARK_MAIN();

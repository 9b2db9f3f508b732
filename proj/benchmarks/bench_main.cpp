#include <random>

#include <benchmark/benchmark.h>

#include "infoproj/exact_info.hpp"
#include "infoproj/harness/train.hpp"
#include "infoproj/matrix_info.hpp"
#include "infoproj/tensor_core.hpp"

using namespace infoproj;

namespace {

DenseMatrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = g(rng);
    return m;
}

void BM_SymEigvals(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    DenseMatrix a = gaussian(n, n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j);
    for (auto _ : state) benchmark::DoNotOptimize(sym_eigvals(a));
}
BENCHMARK(BM_SymEigvals)->Arg(8)->Arg(32)->Arg(64);

void BM_MatrixMiAlpha2(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix z1 = gaussian(n, 16, 2), z2 = gaussian(n, 8, 3);
    for (auto _ : state) benchmark::DoNotOptimize(matrix_mi_alpha2(z1, z2));
}
BENCHMARK(BM_MatrixMiAlpha2)->Arg(128)->Arg(256);

void BM_MatrixMiGradAlpha2(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DenseMatrix z1 = gaussian(n, 16, 4), z2 = gaussian(n, 8, 5);
    for (auto _ : state) benchmark::DoNotOptimize(matrix_mi_grad_alpha2(z1, z2));
}
BENCHMARK(BM_MatrixMiGradAlpha2)->Arg(128);

void BM_SpectralEntropy(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const GramKernel g = feature_kernel(gaussian(n, 8, 6));
    for (auto _ : state) benchmark::DoNotOptimize(matrix_entropy(g, EntropyOrder(1.0)));
}
BENCHMARK(BM_SpectralEntropy)->Arg(32);

void BM_VerifyChain(benchmark::State& state) {
    std::uint64_t seed = 0;
    for (auto _ : state) {
        const JointChain c = sample_chain({6, 6, 6, 6, 6}, seed++);
        benchmark::DoNotOptimize(check_theorem1(c));
        benchmark::DoNotOptimize(check_theorem2(c));
        benchmark::DoNotOptimize(check_theorem3(c));
        benchmark::DoNotOptimize(check_lemmas(c));
    }
}
BENCHMARK(BM_VerifyChain);

// One epoch of the default toy run, including metrics and probes.
void BM_TrainEpoch(benchmark::State& state) {
    const harness::SyntheticDataset data = harness::gen_synthetic(harness::DataSpec{});
    harness::TrainConfig c;
    c.epochs = 1;
    for (auto _ : state) benchmark::DoNotOptimize(harness::train(c, data));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

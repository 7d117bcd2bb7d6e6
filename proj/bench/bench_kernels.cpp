#include <benchmark/benchmark.h>

#include <random>

#include "tgiqa/kernels.hpp"
#include "tgiqa/stats.hpp"
#include "tgiqa/tg_iqa.hpp"

using namespace tgiqa;

namespace {

TensorF32 random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<float> nd;
    TensorF32 t(rows, cols);
    for (auto& v : t.data) v = nd(gen);
    return normalize_rows(t);
}

template <auto Fn>
void BM_Similarity(benchmark::State& state) {
    const auto z = random_rows(static_cast<std::size_t>(state.range(0)), 512, 1);
    const auto w = random_rows(1000, 512, 2);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(z, w));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_QualityRows(benchmark::State& state) {
    const auto s = random_rows(static_cast<std::size_t>(state.range(0)), 1000, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(s, 0.01));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_Bootstrap(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> x(n);
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    for (auto& v : x) v = nd(gen);
    const kernels::IndexStatistic stat = [&](std::span<const std::size_t> idx) {
        double s = 0;
        for (auto i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
    };
    for (auto _ : state) benchmark::DoNotOptimize(Fn(n, 1000, 9, stat));
}

}  // namespace

BENCHMARK(BM_Similarity<kernels::serial::similarity_matrix>)->Name("similarity/serial")->Arg(256)->Arg(2048);
BENCHMARK(BM_Similarity<kernels::omp::similarity_matrix>)->Name("similarity/omp")->Arg(256)->Arg(2048)->UseRealTime();
BENCHMARK(BM_QualityRows<kernels::serial::quality_rows>)->Name("quality_rows/serial")->Arg(10000);
BENCHMARK(BM_QualityRows<kernels::omp::quality_rows>)->Name("quality_rows/omp")->Arg(10000)->UseRealTime();
BENCHMARK(BM_Bootstrap<kernels::serial::resample_statistics>)->Name("bootstrap/serial")->Arg(200)->Arg(5000);
BENCHMARK(BM_Bootstrap<kernels::omp::resample_statistics>)->Name("bootstrap/omp")->Arg(200)->Arg(5000)->UseRealTime();

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "jitcast/clustering.hpp"
#include "jitcast/kernels.hpp"
#include "jitcast/rng.hpp"
#include "jitcast/training.hpp"
#include "jitcast/transformer.hpp"

using namespace jitcast;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.values()) v = uniform(rng, -1, 1);
    return t;
}

template <void (*Kernel)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t)>
void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        std::fill(c.begin(), c.end(), 0.0);
        Kernel(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul<kernels::matmul_acc_serial>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<kernels::matmul_acc_parallel>)->Name("matmul/parallel")->Arg(64)->Arg(128)->Arg(256);

template <bool Parallel>
void BM_Assign(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor points = random_matrix(n, cluster::kProfileDims, 3);
    const Tensor centroids = random_matrix(8, cluster::kProfileDims, 4);
    std::vector<int> labels(n);
    for (auto _ : state) {
        if constexpr (Parallel) cluster::assign_parallel(points, centroids, labels);
        else cluster::assign_serial(points, centroids, labels);
        benchmark::DoNotOptimize(labels.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Assign<false>)->Name("kmeans_assign/serial")->Arg(1000)->Arg(20000);
BENCHMARK(BM_Assign<true>)->Name("kmeans_assign/parallel")->Arg(1000)->Arg(20000);

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
    model::ModelConfig config;
    config.d_model = 16;
    config.d_ff = 32;
    const auto model = model::Transformer::initialize(config, 5);
    const auto batch_size = static_cast<std::size_t>(state.range(0));
    std::vector<train::Example> examples;
    for (std::size_t i = 0; i < batch_size; ++i)
        examples.push_back({random_matrix(30, 3, 10 + i), random_matrix(7, 3, 1000 + i), random_matrix(7, 1, 5000 + i)});
    std::vector<std::size_t> batch(batch_size);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    std::vector<Tensor> grads;
    for (auto _ : state) {
        const double loss = Parallel ? train::batch_gradient_parallel(model, examples, batch, grads)
                                     : train::batch_gradient_serial(model, examples, batch, grads);
        benchmark::DoNotOptimize(loss);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch_size));
}
BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/parallel")->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

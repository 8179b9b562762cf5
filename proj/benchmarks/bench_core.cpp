#include <benchmark/benchmark.h>

#include <vector>

#include "ak/dataset.hpp"
#include "ak/kernel.hpp"
#include "ak/network.hpp"
#include "ak/rng.hpp"
#include "ak/svm.hpp"

namespace {

ak::EmbeddingMatrix random_embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
    ak::EmbeddingMatrix e(n, d, ak::EmbeddingKind::full_tangent);
    ak::rng::Engine engine(seed);
    for (double& v : e.data()) v = ak::rng::normal(engine);
    return e;
}

// Args: rows, columns.
void BM_Gram(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto e = random_embeddings(n, d, 1);
    for (auto _ : state) benchmark::DoNotOptimize(ak::gram(e));
    // Upper triangle only.
    state.counters["flops"] =
        benchmark::Counter(static_cast<double>(n * (n + 1) * d), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Gram)->Args({128, 1024})->Args({128, 16384})->Args({256, 100675})->Unit(benchmark::kMillisecond);

void BM_GradParams(benchmark::State& state, const char* arch) {
    const ak::Shape input{28, 28, 1};
    const auto net = ak::build_network(ak::ArchitectureId::parse(arch), input, 0);
    const auto data = ak::synth_dataset(2, input, 1.0, 0);
    ak::Embedder embed(net, ak::EmbeddingKind::full_tangent);
    for (auto _ : state) benchmark::DoNotOptimize(embed(data.images[0]).data());
    state.counters["params"] = static_cast<double>(net.parameter_count());
}
BENCHMARK_CAPTURE(BM_GradParams, fully_connected, "fully_connected")->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_GradParams, vgg_like, "vgg_like")->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_GradParams, sum_net, "sum_net")->Unit(benchmark::kMicrosecond);

// Args: rows, columns. Labels come from a random hyperplane, so the data is separable.
void BM_TrainSvm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    auto e = ak::rescale_embeddings(random_embeddings(n, d, 2));
    ak::rng::Engine engine(3);
    std::vector<double> w(d);
    for (double& v : w) v = ak::rng::normal(engine);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < d; ++k) s += w[k] * e.row(i)[k];
        y[i] = s >= 0 ? 1 : -1;
    }
    int sweeps = 0;
    for (auto _ : state) {
        const auto m = ak::train_svm(e, y);
        sweeps = m.diagnostics.sweeps;
        benchmark::DoNotOptimize(m.intercept);
    }
    state.counters["sweeps"] = sweeps;
}
BENCHMARK(BM_TrainSvm)->Args({500, 100})->Args({2000, 1000})->Unit(benchmark::kMillisecond);

void BM_EffectiveRank(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto g = ak::gram(random_embeddings(n, 64, 4));
    for (auto _ : state) benchmark::DoNotOptimize(ak::effective_rank(g).value);
}
BENCHMARK(BM_EffectiveRank)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

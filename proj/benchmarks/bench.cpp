#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "laggre/encoder.hpp"
#include "laggre/kmeans.hpp"
#include "laggre/memory_bank.hpp"
#include "laggre/neighbors.hpp"
#include "laggre/objective.hpp"
#include "laggre/probability.hpp"

using namespace laggre;

namespace {

Embedding random_query(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> z(d);
  for (auto& x : z) x = g(rng);
  return normalize(z);
}

void BM_SimilarityRow(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto bank = MemoryBank::init_random(n, 128, 1);
  const auto v = random_query(128, 2);
  std::vector<double> out(n);
  for (auto _ : state) {
    similarity_row(v.values(), bank, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_SimilarityRow)->Arg(2000)->Arg(20000)->Arg(100000);

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto bank = MemoryBank::init_random(n, 32, 3);
  const auto sims = similarity_row(random_query(32, 4), bank);
  for (auto _ : state) benchmark::DoNotOptimize(top_k(sims, k));
}
BENCHMARK(BM_TopK)->Args({20000, 64})->Args({100000, 4096});

void BM_LaLossAndGrad(benchmark::State& state) {
  const std::size_t n = 20000, d = 128;
  const auto bank = MemoryBank::init_random(n, d, 5);
  const auto v = random_query(d, 6);
  const auto sims = similarity_row(v, bank);
  NeighborSets sets{with_index(top_k(sims, 4096), 0), with_index(top_k(sims, 100), 0)};
  for (auto _ : state) benchmark::DoNotOptimize(la_loss_and_grad(sims, sets, bank, Temperature(0.07)));
}
BENCHMARK(BM_LaLossAndGrad);

void BM_KMeans(benchmark::State& state) {
  const auto bank = MemoryBank::init_random(static_cast<std::size_t>(state.range(0)), 16, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(kmeans_fit(bank, {static_cast<std::size_t>(state.range(1)), 1, 20, 1}));
}
BENCHMARK(BM_KMeans)->Args({2000, 20})->Args({20000, 156})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const std::vector<std::size_t> hidden{128, 64};
  const auto params = EncoderParams::init(64, hidden, 16, 8);
  std::vector<double> x(64, 0.25);
  std::vector<double> g(16, 0.1);
  for (auto _ : state) {
    const auto f = forward(params, x);
    benchmark::DoNotOptimize(backward(params, f.cache, g));
  }
}
BENCHMARK(BM_ForwardBackward);

}  // namespace

BENCHMARK_MAIN();

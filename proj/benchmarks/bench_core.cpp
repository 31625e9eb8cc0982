#include <benchmark/benchmark.h>

#include <random>

#include "modelmap/divergence.hpp"
#include "modelmap/embed.hpp"
#include "modelmap/synthetic.hpp"

using namespace modelmap;

namespace {

LogLikelihoodMatrix random_loglik(Eigen::Index k, Eigen::Index n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(-300.0, 40.0);
  Matrix m(k, n);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = normal(rng);
  return LogLikelihoodMatrix(std::move(m), synthetic_models(static_cast<std::size_t>(k)),
                             TextSetMeta::synthetic(static_cast<std::size_t>(n)));
}

void BM_DoubleCenter(benchmark::State& state) {
  const auto m = random_loglik(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(double_center(m));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_DoubleCenter)->Args({100, 10000})->Args({1000, 10000});

void BM_KlMatrix(benchmark::State& state) {
  const auto c = rescale_bits_per_byte(double_center(random_loglik(state.range(0), 10000)));
  const auto threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kl_matrix(c, std::nullopt, threads));
  state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(0) - 1) / 2);
}
BENCHMARK(BM_KlMatrix)->Args({200, 1})->Args({200, 4})->UseRealTime();

void BM_FbmFactor(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(FbmGenerator(0.3, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_FbmFactor)->Arg(512)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);

void BM_FbmSample(benchmark::State& state) {
  const FbmGenerator gen(0.3, 1024);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.sample(16, seed++));
}
BENCHMARK(BM_FbmSample);

void BM_TsneGradient(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto k = state.range(0);
  Matrix x(k, 10), y(k, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) x(i, j) = normal(rng);
    for (Eigen::Index j = 0; j < 2; ++j) y(i, j) = normal(rng);
  }
  const auto aff = tsne_affinities(pairwise_sq_distances(x), 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(tsne_gradient(aff.joint, y));
}
BENCHMARK(BM_TsneGradient)->Arg(200)->Arg(800);

}  // namespace
BENCHMARK_MAIN();

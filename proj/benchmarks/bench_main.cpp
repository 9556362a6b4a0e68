#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "coderoute/classifier.hpp"
#include "coderoute/difficulty.hpp"
#include "coderoute/embedding.hpp"
#include "coderoute/rng.hpp"
#include "coderoute/router.hpp"
#include "coderoute/synth.hpp"

using namespace coderoute;

namespace {

std::vector<double> lengths(std::size_t n) {
  SplitMix64 rng(1);
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.between(200, 16384));
  return v;
}

std::string prompt(std::size_t words) {
  SplitMix64 rng(2);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += "tok" + std::to_string(rng.below(500)) + " ";
  return s;
}

void BM_KMeans(benchmark::State& state) {
  const auto xs = lengths(static_cast<std::size_t>(state.range(0)));
  const int k = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(fit_kmeans_1d(xs, k));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KMeans)->Args({100, 3})->Args({589, 3})->Args({2000, 3})->Args({589, 6});

void BM_HashedEmbed(benchmark::State& state) {
  const HashedEmbedder embedder(768, 512);
  const auto text = prompt(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(embedder.embed(text));
}
BENCHMARK(BM_HashedEmbed)->Arg(32)->Arg(256)->Arg(1024);

void BM_Projection(benchmark::State& state) {
  const ProjectionHead head(768, 128);
  const auto x = HashedEmbedder(768, 512).embed(prompt(200));
  for (auto _ : state) benchmark::DoNotOptimize(head.forward(x));
}
BENCHMARK(BM_Projection);

// A forest of the default shape trained on random 128-d features.
BoostedForest random_forest(int rounds) {
  SplitMix64 rng(3);
  std::vector<std::vector<double>> x(300, std::vector<double>(128));
  std::vector<int> y;
  for (auto& row : x) {
    for (auto& v : row) v = rng.unit() - 0.5;
    y.push_back(row[0] > 0 ? (row[1] > 0 ? 0 : 1) : (row[2] > 0 ? 2 : 3));
  }
  BoostingConfig cfg;
  cfg.rounds = rounds;
  return fit_forest(x, y, {"a", "b", "c", "d"}, cfg);
}

void BM_PredictProba(benchmark::State& state) {
  const auto forest = random_forest(static_cast<int>(state.range(0)));
  std::vector<double> x(128, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(forest.predict_proba(x));
}
BENCHMARK(BM_PredictProba)->Arg(50)->Arg(200);

void BM_FitForest(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(random_forest(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_FitForest)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Route(benchmark::State& state) {
  const auto corpus = generate_synthetic_corpus(default_synth_spec(), 42);
  const auto forest = [&] {
    SplitMix64 rng(4);
    const auto base = BaseEmbedder::hashed();
    const ProjectionHead head(768, 128);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const auto& p : corpus.problems()) {
      x.push_back(head.forward(base.embed(p)));
      y.push_back(static_cast<int>(rng.below(corpus.pool().size())));
    }
    return fit_forest(x, y, corpus.pool().model_ids(), BoostingConfig{});
  }();
  const Router router(BaseEmbedder::hashed(), ProjectionHead(768, 128), forest, corpus.pool());
  const auto text = prompt(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(router.route(text));
}
BENCHMARK(BM_Route)->Arg(64)->Arg(400);

}  // namespace

BENCHMARK_MAIN();

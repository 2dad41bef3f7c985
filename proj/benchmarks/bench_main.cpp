#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "fga/analysis.hpp"
#include "fga/effects.hpp"
#include "fga/estimation.hpp"
#include "fga/scm.hpp"
#include "fga/scm_io.hpp"

namespace {

using namespace fga;

StagedSample toy_data(std::size_t n, const StageTriple& st) {
  const ScmPair pair = resolve_pair("toyA");
  return make_staged_sample(pair.levels, sample_staged(pair, st, n, 11), st);
}

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  Matrix d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = u(g);
  }
  return d;
}

void BM_SampleStaged(benchmark::State& state) {
  const ScmPair pair = resolve_pair("toyA");
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_staged(pair, kOutcomeStage, n, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleStaged)->Arg(20000)->Arg(100000);

void BM_EstimateDR(benchmark::State& state) {
  const StagedSample data = toy_data(static_cast<std::size_t>(state.range(0)), kOutcomeStage);
  const PoQuery q{0, 0, 1, kOutcomeStage, 1};
  for (auto _ : state) benchmark::DoNotOptimize(estimate_po(data, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimateDR)->Arg(20000)->Arg(100000);

void BM_EstimatePlugin(benchmark::State& state) {
  const StagedSample data = toy_data(static_cast<std::size_t>(state.range(0)), kOutcomeStage);
  const PoQuery q{0, 0, 1, kOutcomeStage, 1};
  for (auto _ : state) benchmark::DoNotOptimize(estimate_plugin(data, q));
}
BENCHMARK(BM_EstimatePlugin)->Arg(20000)->Arg(100000);

void BM_EffectDecomposition(benchmark::State& state) {
  StageDatasets data;
  data.emplace(kOutcomeStage, toy_data(20000, kOutcomeStage));
  for (auto _ : state) {
    for (EffectKind k : kPathwayKinds) {
      benchmark::DoNotOptimize(estimate_effect(data, k, kOutcomeStage, Transition{}, 1));
    }
  }
}
BENCHMARK(BM_EffectDecomposition);

void BM_ExactPo(benchmark::State& state) {
  const ScmPair pair = resolve_pair("toyA");
  const PoQuery q{0, 1, 1, kMediatorStage, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval_po_exact(pair, q));
    benchmark::DoNotOptimize(eval_po_idformula(pair, q));
  }
}
BENCHMARK(BM_ExactPo);

void BM_Ward(benchmark::State& state) {
  const Matrix d = random_matrix(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(ward_cluster(d));
}
BENCHMARK(BM_Ward)->Arg(10)->Arg(50)->Arg(200);

void BM_Permutation(benchmark::State& state) {
  const Matrix d = random_matrix(10, 4);
  const std::vector<std::string> families{"a", "a", "b", "b", "c", "c", "d", "d", "e", "f"};
  for (auto _ : state) benchmark::DoNotOptimize(family_permutation_test(d, families, static_cast<int>(state.range(0)), 1));
}
BENCHMARK(BM_Permutation)->Arg(5000);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "convsynth/rng.hpp"
#include "convsynth/scorer.hpp"

using namespace convsynth;

namespace {

Words random_words(Rng& rng, std::size_t n) {
  static const char* vocab[] = {"the", "a", "cat", "sat", "on", "mat", "dog", "ran"};
  Words w(n);
  for (auto& x : w) x = vocab[rng.index(8)];
  return w;
}

void BM_EditDistance(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_words(rng, n), b = random_words(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(word_edit_distance(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EditDistance)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

void BM_CpWer(benchmark::State& state) {
  Rng rng(2);
  const auto speakers = static_cast<std::size_t>(state.range(0));
  std::vector<NamedStream> refs, hyps;
  for (std::size_t i = 0; i < speakers; ++i) {
    refs.push_back({"r" + std::to_string(i), random_words(rng, 60)});
    hyps.push_back({"h" + std::to_string(i), random_words(rng, 60)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(cp_wer(refs, hyps));
}
BENCHMARK(BM_CpWer)->DenseRange(1, 8);

}  // namespace

BENCHMARK_MAIN();

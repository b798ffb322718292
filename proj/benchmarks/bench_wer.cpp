#include <benchmark/benchmark.h>

#include "cpsfuse/agreement.hpp"
#include "cpsfuse/rng.hpp"

using namespace cpsfuse;

static void BM_WordEditDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const std::vector<std::string> vocab{"we", "need", "to", "move", "the", "block", "left", "okay"};
  std::vector<std::string> ref, hyp;
  for (std::size_t i = 0; i < n; ++i) {
    ref.push_back(vocab[rng.below(vocab.size())]);
    hyp.push_back(rng.uniform() < 0.8 ? ref.back() : vocab[rng.below(vocab.size())]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(corpus::word_edit_distance(ref, hyp));
}
BENCHMARK(BM_WordEditDistance)->Arg(20)->Arg(200)->Arg(2000);

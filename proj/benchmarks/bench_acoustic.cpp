#include <benchmark/benchmark.h>

#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/synthlab.hpp"

using namespace cpsfuse;

static void BM_ExtractFeatures(benchmark::State& state) {
  const double seconds = static_cast<double>(state.range(0)) / 1000.0;
  const auto clip = synthlab::synthesize_clip({160.0, 0.2}, seconds, 16000.0, 30.0, 1);
  acoustic::AcousticConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(acoustic::extract_features(clip, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clip.samples.size()));
}
BENCHMARK(BM_ExtractFeatures)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_Resample44kTo16k(benchmark::State& state) {
  const auto clip = synthlab::synthesize_clip({160.0, 0.2}, 1.0, 44100.0, 30.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(audio::resample(clip, 16000.0));
}
BENCHMARK(BM_Resample44kTo16k)->Unit(benchmark::kMillisecond);

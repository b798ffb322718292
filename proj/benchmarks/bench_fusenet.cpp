#include <benchmark/benchmark.h>

#include "cpsfuse/fusenet.hpp"

using namespace cpsfuse;
using namespace cpsfuse::fusenet;

// One minibatch update of the text model; range(0) is the hidden size.
static void BM_TextTrainStep(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const ModelDims dims{64, 32, h, h};
  TextClassifier model({"A", "B", "C", "D"}, dims, 1);
  Rng rng(2);
  std::vector<Tensor> seqs;
  for (int i = 0; i < 16; ++i) seqs.push_back(Tensor::uniform(8, 64, 1.0, rng, false));
  std::vector<NeuralInstance> xs;
  for (int i = 0; i < 16; ++i) xs.push_back({"x" + std::to_string(i), &seqs[i], nullptr, std::string(1, 'A' + i % 4)});
  std::vector<const NeuralInstance*> batch;
  for (const auto& x : xs) batch.push_back(&x);
  grad::AdamWState opt;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, opt, batch));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TextTrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_FusionPredict(benchmark::State& state) {
  FusionClassifier model({"A", "B", "C"}, ModelDims{64, 32, 64, 64}, 3);
  Rng rng(4);
  const auto text = Tensor::uniform(12, 64, 1.0, rng, false);
  const auto audio = Tensor::uniform(20, 32, 1.0, rng, false);
  const NeuralInstance x{"x", &text, &audio, ""};
  for (auto _ : state) benchmark::DoNotOptimize(predict_neural(model, x));
}
BENCHMARK(BM_FusionPredict)->Unit(benchmark::kMicrosecond);

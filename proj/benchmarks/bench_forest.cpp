#include <benchmark/benchmark.h>

#include "cpsfuse/forest.hpp"
#include "cpsfuse/synthlab.hpp"
#include "cpsfuse/tfidf.hpp"

using namespace cpsfuse;

namespace {

struct Data {
  std::vector<classical::SparseVector> X;
  std::vector<std::string> y;
};

const Data& data() {
  static const Data d = [] {
    const auto spec = synthlab::reference_preset(synthlab::ChannelMode::TextOnly, 1, 0.25);
    const auto g = synthlab::generate_corpus(spec, {});
    std::vector<std::string> texts;
    Data out;
    for (const auto& r : g.corpus.records()) {
      texts.push_back(r.utterance.text);
      out.y.push_back(r.codes[0].class_label);
    }
    const auto model = classical::fit_tfidf(texts, classical::english_stopwords());
    for (const auto& t : texts) out.X.push_back(model.transform(t));
    return out;
  }();
  return d;
}

}  // namespace

static void BM_TrainForest(benchmark::State& state) {
  classical::RfConfig cfg;
  cfg.n_trees = static_cast<std::size_t>(state.range(0));
  const auto& d = data();
  for (auto _ : state) benchmark::DoNotOptimize(classical::train_random_forest(d.X, d.y, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.X.size()));
}
BENCHMARK(BM_TrainForest)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_PredictForest(benchmark::State& state) {
  classical::RfConfig cfg;
  cfg.n_trees = 100;
  const auto& d = data();
  const auto model = classical::train_random_forest(d.X, d.y, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(d.X));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.X.size()));
}
BENCHMARK(BM_PredictForest)->Unit(benchmark::kMillisecond);

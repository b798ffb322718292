#include "cpsfuse/fusenet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <type_traits>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/metrics.hpp"
#include "cpsfuse/parallel.hpp"
#include "cpsfuse/split.hpp"

namespace cpsfuse::fusenet {

Var Binding::operator()(Tensor& t) {
  for (const auto& [p, v] : bound_) {
    if (p == &t) return v;
  }
  Var v;
  if (params_) {
    const auto it = std::find(params_->begin(), params_->end(), &t);
    if (it == params_->end()) throw Error("tensor is not a registered parameter");
    v = graph_.param(t, (*sinks_)[static_cast<std::size_t>(it - params_->begin())]);
  } else if (track_grads_) {
    v = graph_.param(t);
  } else {
    v = graph_.input(t);
  }
  bound_.emplace_back(&t, v);
  return v;
}

namespace {

double bound_for(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

LstmDirection init_direction(std::size_t d, std::size_t h, Rng& rng) {
  LstmDirection dir;
  dir.w_ih = Tensor::uniform(d, 4 * h, bound_for(d), rng);
  dir.w_hh = Tensor::uniform(h, 4 * h, bound_for(h), rng);
  dir.bias = Tensor::uniform(1, 4 * h, bound_for(h), rng);
  for (std::size_t j = h; j < 2 * h; ++j) dir.bias.data[j] = 1.0;
  return dir;
}

}  // namespace

BiLstmParams BiLstmParams::init(std::size_t input, std::size_t hidden, Rng& rng) {
  if (input == 0 || hidden == 0) throw Error("BiLSTM sizes must be positive");
  BiLstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.forward = init_direction(input, hidden, rng);
  p.backward = init_direction(input, hidden, rng);
  return p;
}

std::vector<Tensor*> BiLstmParams::tensors() {
  return {&forward.w_ih, &forward.w_hh, &forward.bias, &backward.w_ih, &backward.w_hh, &backward.bias};
}

std::vector<std::string> BiLstmParams::names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const char* dir : {"fwd", "bwd"}) {
    for (const char* t : {"w_ih", "w_hh", "bias"}) out.push_back(fmt::format("{}.{}.{}", prefix, dir, t));
  }
  return out;
}

Var lstm_direction(Binding& bind, Var seq, LstmDirection& params, std::size_t hidden, bool reverse) {
  Graph& g = bind.graph();
  const std::size_t steps = seq.rows();
  if (seq.cols() != params.w_ih.rows()) {
    throw Error(fmt::format("sequence width {} does not match LSTM input size {}", seq.cols(),
                            params.w_ih.rows()));
  }
  const std::size_t h = hidden;
  const Var xw = g.add(g.matmul(seq, bind(params.w_ih)), bind(params.bias));
  const Var whh = bind(params.w_hh);
  std::vector<Var> states(steps);
  Var hs{}, cs{};
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    Var z = g.slice_rows(xw, t, t + 1);
    if (s > 0) z = g.add(z, g.matmul(hs, whh));
    const Var i = g.sigmoid(g.slice_cols(z, 0, h));
    const Var f = g.sigmoid(g.slice_cols(z, h, 2 * h));
    const Var c_hat = g.tanh(g.slice_cols(z, 2 * h, 3 * h));
    const Var o = g.sigmoid(g.slice_cols(z, 3 * h, 4 * h));
    cs = s > 0 ? g.add(g.mul(f, cs), g.mul(i, c_hat)) : g.mul(i, c_hat);
    hs = g.mul(o, g.tanh(cs));
    states[t] = hs;
  }
  return g.concat(states, 0);
}

Var bilstm_forward(Binding& bind, Var seq, BiLstmParams& params) {
  if (seq.cols() != params.input) {
    throw Error(fmt::format("sequence width {} does not match BiLSTM input size {}", seq.cols(),
                            params.input));
  }
  const Var fwd = lstm_direction(bind, seq, params.forward, params.hidden, false);
  const Var bwd = lstm_direction(bind, seq, params.backward, params.hidden, true);
  return bind.graph().concat({fwd, bwd}, 1);
}

AttnPoolParams AttnPoolParams::init(std::size_t width, Rng& rng) {
  return {Tensor::uniform(width, 1, bound_for(width), rng)};
}

std::vector<Tensor*> AttnPoolParams::tensors() { return {&score}; }

std::vector<std::string> AttnPoolParams::names(const std::string& prefix) const {
  return {prefix + ".score"};
}

Pooled attention_pool(Binding& bind, Var H, AttnPoolParams& params) {
  Graph& g = bind.graph();
  const Var scores = g.matmul(H, bind(params.score));
  const Var weights = g.softmax(scores, 0);
  return {g.matmul(g.transpose(weights), H), weights};
}

Var fuse(Graph& g, Var text_vec, Var audio_vec) { return g.concat({text_vec, audio_vec}, 1); }

LinearParams LinearParams::init(std::size_t in, std::size_t out, Rng& rng) {
  return {Tensor::uniform(in, out, bound_for(in), rng), Tensor::uniform(1, out, bound_for(in), rng)};
}

std::vector<Tensor*> LinearParams::tensors() { return {&weight, &bias}; }

std::vector<std::string> LinearParams::names(const std::string& prefix) const {
  return {prefix + ".weight", prefix + ".bias"};
}

Branch Branch::init(std::size_t input, std::size_t hidden, Rng& rng) {
  Branch b;
  b.lstm = BiLstmParams::init(input, hidden, rng);
  b.attn = AttnPoolParams::init(2 * hidden, rng);
  return b;
}

Var Branch::encode(Binding& bind, Var seq) {
  return attention_pool(bind, bilstm_forward(bind, seq, lstm), attn).vector;
}

std::vector<Tensor*> Branch::tensors() {
  auto out = lstm.tensors();
  out.push_back(&attn.score);
  return out;
}

std::vector<std::string> Branch::names(const std::string& prefix) const {
  auto out = lstm.names(prefix + ".lstm");
  auto a = attn.names(prefix + ".attn");
  out.insert(out.end(), a.begin(), a.end());
  return out;
}

namespace {

std::vector<std::string> sorted_classes(std::vector<std::string> classes) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw DataError("a classifier needs at least two classes");
  return classes;
}

Var linear(Binding& bind, Var x, LinearParams& p) {
  Graph& g = bind.graph();
  return g.add(g.matmul(x, bind(p.weight)), bind(p.bias));
}

std::size_t class_index(const std::vector<std::string>& classes, const std::string& label) {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) {
    throw DataError(fmt::format("label '{}' is not a model class", label));
  }
  return static_cast<std::size_t>(it - classes.begin());
}

const Tensor& require_text(const NeuralInstance& x) {
  if (!x.text) throw DataError(fmt::format("instance '{}' has no text embedding", x.id));
  return *x.text;
}

const Tensor& require_audio(const NeuralInstance& x) {
  if (!x.audio) throw DataError(fmt::format("instance '{}' has no audio embedding", x.id));
  return *x.audio;
}

}  // namespace

TextClassifier::TextClassifier(std::vector<std::string> classes, const ModelDims& dims,
                               std::uint64_t seed)
    : classes_(sorted_classes(std::move(classes))), dims_(dims) {
  Rng text_rng(derive_seed(seed, 1));
  Rng head_rng(derive_seed(seed, 3));
  text_ = Branch::init(dims.text_dim, dims.text_hidden, text_rng);
  head_ = LinearParams::init(text_.output_width(), classes_.size(), head_rng);
}

Var TextClassifier::logits(Binding& bind, const NeuralInstance& x) {
  const Var seq = bind.graph().input(require_text(x));
  return linear(bind, text_.encode(bind, seq), head_);
}

std::vector<Tensor*> TextClassifier::parameters() {
  auto out = text_.tensors();
  for (auto* t : head_.tensors()) out.push_back(t);
  return out;
}

std::vector<std::string> TextClassifier::parameter_names() const {
  auto out = text_.names("text");
  for (auto& n : head_.names("head")) out.push_back(n);
  return out;
}

FusionClassifier::FusionClassifier(std::vector<std::string> classes, const ModelDims& dims,
                                   std::uint64_t seed)
    : classes_(sorted_classes(std::move(classes))), dims_(dims) {
  Rng text_rng(derive_seed(seed, 1));
  Rng audio_rng(derive_seed(seed, 2));
  Rng head_rng(derive_seed(seed, 3));
  text_ = Branch::init(dims.text_dim, dims.text_hidden, text_rng);
  audio_ = Branch::init(dims.audio_dim, dims.audio_hidden, audio_rng);
  head_ = LinearParams::init(text_.output_width() + audio_.output_width(), classes_.size(), head_rng);
}

Var FusionClassifier::logits(Binding& bind, const NeuralInstance& x) {
  Graph& g = bind.graph();
  const Var text_seq = g.input(require_text(x));
  const Var audio_seq = g.input(require_audio(x));
  const Var t = text_.encode(bind, text_seq);
  const Var a = audio_.encode(bind, audio_seq);
  return linear(bind, fuse(g, t, a), head_);
}

std::vector<Tensor*> FusionClassifier::parameters() {
  auto out = text_.tensors();
  for (auto* t : audio_.tensors()) out.push_back(t);
  for (auto* t : head_.tensors()) out.push_back(t);
  return out;
}

std::vector<std::string> FusionClassifier::parameter_names() const {
  auto out = text_.names("text");
  for (auto& n : audio_.names("audio")) out.push_back(n);
  for (auto& n : head_.names("head")) out.push_back(n);
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (!(lr > 0.0)) throw Error("lr must be positive");
  if (!(adam_eps > 0.0)) throw Error("adam eps must be positive");
  if (weight_decay < 0.0) throw Error("weight_decay must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw Error("val_fraction must be in (0, 1)");
}

template <typename Model>
double train_step(Model& model, grad::AdamWState& state, std::vector<const NeuralInstance*> batch) {
  if (batch.empty()) throw Error("empty training batch");
  std::sort(batch.begin(), batch.end(),
            [](const NeuralInstance* a, const NeuralInstance* b) { return a->id < b->id; });
  const auto params = model.parameters();
  const std::size_t n = batch.size();
  std::vector<std::vector<std::vector<double>>> sinks(n, std::vector<std::vector<double>>(params.size()));
  std::vector<double> losses(n);
  parallel_for(n, [&](std::size_t i) {
    Graph g;
    Binding bind(g, params, sinks[i]);
    const Var z = model.logits(bind, *batch[i]);
    const Var loss = g.cross_entropy(z, {class_index(model.classes(), batch[i]->label)});
    losses[i] = g.value(loss).data[0];
    g.backward(loss);
  });
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& grad = params[k]->grad;
    grad.assign(params[k]->size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = sinks[i][k];
      for (std::size_t j = 0; j < s.size(); ++j) grad[j] += s[j];
    }
    for (auto& x : grad) x *= inv;
  }
  grad::adamw_step(state, params);
  double total = 0.0;
  for (double l : losses) total += l;
  return total * inv;
}

template <typename Model>
NeuralPrediction predict_neural(Model& model, const NeuralInstance& x) {
  Graph g;
  Binding bind(g, false);
  const Var probs = g.softmax(model.logits(bind, x), 1);
  NeuralPrediction out;
  out.probabilities = g.value(probs).data;
  const auto best = std::max_element(out.probabilities.begin(), out.probabilities.end());
  out.label = model.classes()[static_cast<std::size_t>(best - out.probabilities.begin())];
  return out;
}

template <typename Model>
double mean_loss(Model& model, const std::vector<const NeuralInstance*>& xs) {
  if (xs.empty()) throw Error("mean_loss over zero instances");
  std::vector<double> losses(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    Graph g;
    Binding bind(g, false);
    const Var loss = g.cross_entropy(model.logits(bind, *xs[i]), {class_index(model.classes(), xs[i]->label)});
    losses[i] = g.value(loss).data[0];
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(xs.size());
}

namespace {

template <typename Model>
std::vector<std::vector<double>> snapshot(Model& model) {
  std::vector<std::vector<double>> out;
  for (auto* p : model.parameters()) out.push_back(p->data);
  return out;
}

}  // namespace

template <typename Model>
TrainResult train(Model& model, const std::vector<NeuralInstance>& instances, const TrainConfig& config) {
  config.validate();
  constexpr bool kFusion = std::is_same_v<Model, FusionClassifier>;
  std::vector<std::string> labels;
  for (const auto& x : instances) {
    require_text(x);
    if constexpr (kFusion) require_audio(x);
    class_index(model.classes(), x.label);
    labels.push_back(x.label);
  }
  const auto split = corpus::stratified_indices(labels, config.val_fraction, config.seed, true);
  if (split.held_out.empty()) throw DataError("validation split is empty");
  for (const auto& c : model.classes()) {
    const bool seen = std::any_of(split.kept.begin(), split.kept.end(),
                                  [&](std::size_t i) { return labels[i] == c; });
    if (!seen) throw DataError(fmt::format("class '{}' has no instances in the fit split", c));
  }

  TrainResult result;
  std::vector<const NeuralInstance*> val;
  for (auto i : split.kept) result.fit_ids.push_back(instances[i].id);
  for (auto i : split.held_out) {
    result.val_ids.push_back(instances[i].id);
    val.push_back(&instances[i]);
  }

  grad::AdamWState state;
  state.config.lr = config.lr;
  state.config.eps = config.adam_eps;
  state.config.weight_decay = config.weight_decay;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order = split.kept;
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<const NeuralInstance*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i) {
        batch.push_back(&instances[order[i]]);
      }
      loss_sum += train_step(model, state, batch) * static_cast<double>(batch.size());
    }

    std::vector<std::string> truth;
    std::vector<double> losses(val.size());
    std::vector<std::string> val_pred(val.size());
    parallel_for(val.size(), [&](std::size_t i) {
      Graph g;
      Binding bind(g, false);
      const Var z = model.logits(bind, *val[i]);
      losses[i] = g.value(g.cross_entropy(z, {class_index(model.classes(), val[i]->label)})).data[0];
      const auto& p = g.value(z).data;
      val_pred[i] = model.classes()[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
    });
    for (const auto* x : val) truth.push_back(x->label);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(val.size());
    rec.val_weighted_f1 = metrics::weighted_metrics(truth, val_pred, model.classes()).summary.f1;
    result.records.push_back(rec);
    result.snapshots.push_back(snapshot(model));
  }
  return result;
}

std::size_t select_epoch(const std::vector<EpochRecord>& records) {
  if (records.empty()) throw Error("select_epoch needs at least one record");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& b = records[best];
    if (r.val_weighted_f1 > b.val_weighted_f1 ||
        (r.val_weighted_f1 == b.val_weighted_f1 && r.val_loss < b.val_loss)) {
      best = i;
    }
  }
  return records[best].epoch;
}

void transfer_init(FusionClassifier& fusion, const TextClassifier& donor) {
  const auto& fd = fusion.dims();
  const auto& dd = donor.dims();
  if (fd.text_dim != dd.text_dim || fd.text_hidden != dd.text_hidden) {
    throw Error(fmt::format("text branch mismatch: fusion ({}, {}) vs donor ({}, {})", fd.text_dim,
                            fd.text_hidden, dd.text_dim, dd.text_hidden));
  }
  fusion.text() = donor.text();
}

template <typename Model>
void restore(Model& model, const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  if (values.size() != params.size()) throw Error("snapshot does not match the model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (values[k].size() != params[k]->size()) throw Error("snapshot tensor size mismatch");
    params[k]->data = values[k];
  }
}

template <typename Model>
binio::Container to_checkpoint(Model& model) {
  binio::Container c;
  c.put_strings("model.kind", {Model::kKind});
  c.put_strings("model.classes", model.classes());
  const auto& d = model.dims();
  c.put_ints("model.dims", {static_cast<std::int64_t>(d.text_dim), static_cast<std::int64_t>(d.audio_dim),
                            static_cast<std::int64_t>(d.text_hidden),
                            static_cast<std::int64_t>(d.audio_hidden)});
  const auto names = model.parameter_names();
  const auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    std::vector<std::uint64_t> shape(params[k]->shape.begin(), params[k]->shape.end());
    c.put_tensor(names[k], std::move(shape), params[k]->data);
  }
  return c;
}

namespace {

template <typename Model>
Model load_checkpoint(const binio::Container& c) {
  const auto& kind = c.strings("model.kind");
  if (kind.size() != 1 || kind[0] != Model::kKind) {
    throw DataError(fmt::format("checkpoint is not a {} model", Model::kKind));
  }
  const auto& dims = c.ints("model.dims");
  if (dims.size() != 4) throw DataError("checkpoint has malformed dimensions");
  ModelDims d;
  d.text_dim = static_cast<std::size_t>(dims[0]);
  d.audio_dim = static_cast<std::size_t>(dims[1]);
  d.text_hidden = static_cast<std::size_t>(dims[2]);
  d.audio_hidden = static_cast<std::size_t>(dims[3]);
  Model model(c.strings("model.classes"), d, 0);
  const auto names = model.parameter_names();
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& t = c.tensor(names[k]);
    std::vector<std::size_t> shape(t.shape.begin(), t.shape.end());
    if (shape != params[k]->shape) {
      throw DataError(fmt::format("checkpoint tensor '{}' has the wrong shape", names[k]));
    }
    params[k]->data = t.data;
  }
  return model;
}

}  // namespace

TextClassifier load_text_checkpoint(const binio::Container& c) {
  return load_checkpoint<TextClassifier>(c);
}

FusionClassifier load_fusion_checkpoint(const binio::Container& c) {
  return load_checkpoint<FusionClassifier>(c);
}

std::string epoch_log_csv(const std::vector<EpochRecord>& records) {
  std::string out = "epoch,train_loss,val_loss,val_weighted_f1\n";
  for (const auto& r : records) {
    out += fmt::format("{},{:.8f},{:.8f},{:.8f}\n", r.epoch, r.train_loss, r.val_loss, r.val_weighted_f1);
  }
  return out;
}

#define CPSFUSE_INSTANTIATE(M)                                                                  \
  template double train_step<M>(M&, grad::AdamWState&, std::vector<const NeuralInstance*>);     \
  template TrainResult train<M>(M&, const std::vector<NeuralInstance>&, const TrainConfig&);    \
  template NeuralPrediction predict_neural<M>(M&, const NeuralInstance&);                       \
  template double mean_loss<M>(M&, const std::vector<const NeuralInstance*>&);                  \
  template void restore<M>(M&, const std::vector<std::vector<double>>&);                        \
  template binio::Container to_checkpoint<M>(M&);

CPSFUSE_INSTANTIATE(TextClassifier)
CPSFUSE_INSTANTIATE(FusionClassifier)

#undef CPSFUSE_INSTANTIATE

}  // namespace cpsfuse::fusenet

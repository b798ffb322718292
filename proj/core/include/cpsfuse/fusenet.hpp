#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cpsfuse/binio.hpp"
#include "cpsfuse/grad.hpp"

namespace cpsfuse::fusenet {

using grad::Graph;
using grad::Tensor;
using grad::Var;

/// Maps parameter tensors to graph leaves, one leaf per tensor. Without sinks,
/// gradients land in each tensor's own grad (or nowhere when track_grads is
/// false); with sinks, in sinks[i] for params[i].
class Binding {
 public:
  explicit Binding(Graph& graph, bool track_grads = true)
      : graph_(graph), track_grads_(track_grads) {}
  Binding(Graph& graph, const std::vector<Tensor*>& params, std::vector<std::vector<double>>& sinks)
      : graph_(graph), params_(&params), sinks_(&sinks) {}

  Graph& graph() { return graph_; }
  Var operator()(Tensor& t);

 private:
  Graph& graph_;
  bool track_grads_ = true;
  const std::vector<Tensor*>* params_ = nullptr;
  std::vector<std::vector<double>>* sinks_ = nullptr;
  std::vector<std::pair<const Tensor*, Var>> bound_;
};

/// Gate blocks along columns are ordered input, forget, cell, output.
struct LstmDirection {
  Tensor w_ih;  // d x 4h
  Tensor w_hh;  // h x 4h
  Tensor bias;  // 1 x 4h, forget block initialized to 1
};

struct BiLstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  LstmDirection forward;
  LstmDirection backward;

  static BiLstmParams init(std::size_t input, std::size_t hidden, Rng& rng);
  std::vector<Tensor*> tensors();
  std::vector<std::string> names(const std::string& prefix) const;
};

/// Hidden states of one direction, T x h, row t aligned with input step t.
Var lstm_direction(Binding& bind, Var seq, LstmDirection& params, std::size_t hidden, bool reverse);

/// T x 2h: row t is [forward state t | backward state t].
Var bilstm_forward(Binding& bind, Var seq, BiLstmParams& params);

struct AttnPoolParams {
  Tensor score;  // 2h x 1

  static AttnPoolParams init(std::size_t width, Rng& rng);
  std::vector<Tensor*> tensors();
  std::vector<std::string> names(const std::string& prefix) const;
};

struct Pooled {
  Var vector;   // 1 x 2h
  Var weights;  // T x 1
};

Pooled attention_pool(Binding& bind, Var H, AttnPoolParams& params);

/// Text block first, then audio.
Var fuse(Graph& g, Var text_vec, Var audio_vec);

struct LinearParams {
  Tensor weight;  // in x k
  Tensor bias;    // 1 x k

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng);
  std::vector<Tensor*> tensors();
  std::vector<std::string> names(const std::string& prefix) const;
};

struct Branch {
  BiLstmParams lstm;
  AttnPoolParams attn;

  static Branch init(std::size_t input, std::size_t hidden, Rng& rng);
  std::size_t output_width() const { return 2 * lstm.hidden; }
  Var encode(Binding& bind, Var seq);
  std::vector<Tensor*> tensors();
  std::vector<std::string> names(const std::string& prefix) const;
};

/// Training/inference input: embeddings owned elsewhere.
struct NeuralInstance {
  std::string id;
  const Tensor* text = nullptr;
  const Tensor* audio = nullptr;  // fusion model only
  std::string label;
};

struct ModelDims {
  std::size_t text_dim = 64;
  std::size_t audio_dim = 32;
  std::size_t text_hidden = 64;
  std::size_t audio_hidden = 64;
};

/// Text BiLSTM + attention + linear head. classes are kept sorted.
class TextClassifier {
 public:
  TextClassifier() = default;
  TextClassifier(std::vector<std::string> classes, const ModelDims& dims, std::uint64_t seed);

  static constexpr const char* kKind = "neural_text";
  const std::vector<std::string>& classes() const { return classes_; }
  const ModelDims& dims() const { return dims_; }
  Branch& text() { return text_; }
  const Branch& text() const { return text_; }
  LinearParams& head() { return head_; }

  Var logits(Binding& bind, const NeuralInstance& x);
  std::vector<Tensor*> parameters();
  std::vector<std::string> parameter_names() const;

 private:
  std::vector<std::string> classes_;
  ModelDims dims_;
  Branch text_;
  LinearParams head_;
};

/// Text and audio branches, concatenated, linear head over 2h_t + 2h_a.
class FusionClassifier {
 public:
  FusionClassifier() = default;
  FusionClassifier(std::vector<std::string> classes, const ModelDims& dims, std::uint64_t seed);

  static constexpr const char* kKind = "neural_fusion";
  const std::vector<std::string>& classes() const { return classes_; }
  const ModelDims& dims() const { return dims_; }
  Branch& text() { return text_; }
  const Branch& text() const { return text_; }
  Branch& audio() { return audio_; }
  LinearParams& head() { return head_; }

  Var logits(Binding& bind, const NeuralInstance& x);
  std::vector<Tensor*> parameters();
  std::vector<std::string> parameter_names() const;

 private:
  std::vector<std::string> classes_;
  ModelDims dims_;
  Branch text_;
  Branch audio_;
  LinearParams head_;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 2e-5;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_weighted_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  /// Parameter values after each epoch, parallel to records.
  std::vector<std::vector<std::vector<double>>> snapshots;
  std::vector<std::string> fit_ids;
  std::vector<std::string> val_ids;
};

/// Mean cross-entropy of one minibatch and one AdamW update. Members are
/// ordered by id before gradients are reduced, so the result does not depend
/// on the order they are passed in.
template <typename Model>
double train_step(Model& model, grad::AdamWState& state, std::vector<const NeuralInstance*> batch);

/// Stratified fit/validation split, seeded per-epoch shuffles, one record and
/// parameter snapshot per epoch. Throws DataError on missing embeddings or a
/// class without fit instances.
template <typename Model>
TrainResult train(Model& model, const std::vector<NeuralInstance>& instances,
                  const TrainConfig& config);

struct NeuralPrediction {
  std::string label;
  std::vector<double> probabilities;  // model class order
};

template <typename Model>
NeuralPrediction predict_neural(Model& model, const NeuralInstance& x);

template <typename Model>
double mean_loss(Model& model, const std::vector<const NeuralInstance*>& xs);

/// Best validation weighted F1, then lowest validation loss, then earliest.
/// Returns the record's 1-based epoch.
std::size_t select_epoch(const std::vector<EpochRecord>& records);

/// Copies the text branch (BiLSTM and attention) from donor. Head and audio
/// branch are left alone.
void transfer_init(FusionClassifier& fusion, const TextClassifier& donor);

/// Writes parameter values back from a snapshot.
template <typename Model>
void restore(Model& model, const std::vector<std::vector<double>>& snapshot);

/// Named-tensor checkpoint plus class list and dimensions.
template <typename Model>
binio::Container to_checkpoint(Model& model);
TextClassifier load_text_checkpoint(const binio::Container& c);
FusionClassifier load_fusion_checkpoint(const binio::Container& c);

std::string epoch_log_csv(const std::vector<EpochRecord>& records);

}  // namespace cpsfuse::fusenet

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/binio.hpp"
#include "cpsfuse/corpus.hpp"
#include "cpsfuse/embedio.hpp"
#include "cpsfuse/forest.hpp"
#include "cpsfuse/fusenet.hpp"
#include "cpsfuse/metrics.hpp"
#include "cpsfuse/split.hpp"
#include "cpsfuse/synthlab.hpp"

namespace cpsfuse::cli {

enum class ModelKind { RfTfidf, RfTfidfAudio, NeuralText, NeuralFusion };

inline constexpr ModelKind kAllModels[] = {ModelKind::RfTfidf, ModelKind::RfTfidfAudio,
                                           ModelKind::NeuralText, ModelKind::NeuralFusion};

std::string_view model_name(ModelKind m);
/// Throws ConfigError on an unknown name.
ModelKind parse_model(std::string_view name);

bool needs_features(ModelKind m);
bool needs_text_embeddings(ModelKind m);
bool needs_audio_embeddings(ModelKind m);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "cpsfuse_out";
  std::map<std::string, std::filesystem::path> paths;  // corpus, audio_dir, features, ...
  corpus::LabelScheme scheme = corpus::LabelScheme::defaults();
  corpus::SplitSpec split;
  acoustic::AcousticConfig acoustic;
  classical::GridSpec grid;
  classical::RfConfig rf_base;
  fusenet::TrainConfig train;
  std::size_t text_hidden = 64;
  std::size_t audio_hidden = 64;
  bool transfer = true;
  embedio::ToyTextEncoderConfig text_encoder;
  embedio::ToyAudioEncoderConfig audio_encoder;
  std::vector<ModelKind> models{std::begin(kAllModels), std::end(kAllModels)};

  /// Parses and validates every section; throws ConfigError.
  static ExperimentConfig from(const Config& config);

  /// Throws ConfigError naming the key when it was not configured.
  const std::filesystem::path& path(const std::string& key) const;
  /// As path(), and throws DataError when the file or directory is absent.
  const std::filesystem::path& existing(const std::string& key) const;
};

struct ExperimentInputs {
  corpus::Corpus corpus;
  std::map<std::string, acoustic::AcousticFeatureVector> features;  // by utterance id
  std::optional<embedio::EmbeddingStore> text;   // keyed by utterance id
  std::optional<embedio::EmbeddingStore> audio;  // keyed by audio_ref
};

/// Loads what the given models need. Every required input is checked
/// before anything is returned.
ExperimentInputs load_inputs(const ExperimentConfig& config, std::span<const ModelKind> models);

struct DimensionData {
  corpus::Dimension dimension = corpus::Dimension::SocialCognitive;
  std::vector<std::string> classes;  // scheme order, after the rare-class filter
  std::vector<std::string> dropped_classes;
  std::vector<corpus::CodedInstance> train;
  std::vector<corpus::CodedInstance> test;
};

/// Explode, partition, filter and split each dimension that has coded
/// instances. Throws DataError when no dimension has any.
std::vector<DimensionData> prepare_dimensions(const corpus::Corpus& corpus,
                                              const ExperimentConfig& config);

/// "instance_id,class,part" for the split of one dimension.
std::string split_csv(const DimensionData& data);

/// Throws DataError listing the first missing keys when a model lacks
/// features or embeddings for any instance of the prepared dimensions.
void check_coverage(const ExperimentInputs& inputs, const std::vector<DimensionData>& dims,
                    std::span<const ModelKind> models);

struct TrainedModel {
  binio::Container checkpoint;
  std::string log_suffix;  // "epochs" or "cv"
  std::string log_csv;
};

/// Seed shared by every model of one dimension.
std::uint64_t model_seed(const ExperimentConfig& config, corpus::Dimension d);

/// donor_text is the neural_text checkpoint of the same dimension; used by
/// neural_fusion when transfer is enabled.
TrainedModel train_model(ModelKind kind, const DimensionData& data, const ExperimentInputs& inputs,
                         const ExperimentConfig& config, const binio::Container* donor_text);

std::vector<std::string> predict_model(ModelKind kind, const binio::Container& checkpoint,
                                       const std::vector<corpus::CodedInstance>& instances,
                                       const ExperimentInputs& inputs);

/// Relative path -> bytes. Built fully in memory, then written in one go so
/// a failing run leaves no partial tree.
class OutputTree {
 public:
  void add(const std::filesystem::path& relative, std::string content);
  void add(const std::filesystem::path& relative, const std::vector<std::uint8_t>& bytes);
  const std::map<std::filesystem::path, std::string>& files() const { return files_; }
  void write(const std::filesystem::path& root) const;

 private:
  std::map<std::filesystem::path, std::string> files_;
};

std::string artifact_stem(ModelKind kind, corpus::Dimension d);

/// Report, confusion counts and heatmap for one evaluated model.
metrics::Evaluation add_evaluation(OutputTree& out, ModelKind kind, const DimensionData& data,
                                   const std::vector<std::string>& predicted);

std::string confusion_csv(const metrics::ConfusionMatrix& cm);

/// Builds the synthesis spec from synth.* keys (preset reference or custom).
synthlab::SynthSpec synth_spec_from_config(const Config& config, const corpus::LabelScheme& scheme,
                                           std::uint64_t seed);
synthlab::SynthAudioSpec synth_audio_from_config(const Config& config,
                                                 const synthlab::SynthSpec& spec);

}  // namespace cpsfuse::cli

#include "pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cpsfuse/rng.hpp"
#include "cpsfuse/tfidf.hpp"

namespace cpsfuse::cli {

namespace fs = std::filesystem;
using corpus::CodedInstance;
using corpus::Dimension;

std::string_view model_name(ModelKind m) {
  switch (m) {
    case ModelKind::RfTfidf: return "rf_tfidf";
    case ModelKind::RfTfidfAudio: return "rf_tfidf_audio";
    case ModelKind::NeuralText: return "neural_text";
    case ModelKind::NeuralFusion: return "neural_fusion";
  }
  return "?";
}

ModelKind parse_model(std::string_view name) {
  for (auto m : kAllModels) {
    if (model_name(m) == name) return m;
  }
  throw ConfigError(fmt::format(
      "unknown model '{}' (expected rf_tfidf, rf_tfidf_audio, neural_text or neural_fusion)", name));
}

bool needs_features(ModelKind m) { return m == ModelKind::RfTfidfAudio; }
bool needs_text_embeddings(ModelKind m) {
  return m == ModelKind::NeuralText || m == ModelKind::NeuralFusion;
}
bool needs_audio_embeddings(ModelKind m) { return m == ModelKind::NeuralFusion; }

// ---------------------------------------------------------------------------
// Configuration

namespace {

const char* const kPathKeys[] = {"corpus", "audio_dir", "features", "text_embeddings",
                                 "audio_embeddings", "mask.lexicon", "mask.overrides"};

template <typename T, typename F>
std::vector<T> parse_list(const Config& c, const std::string& key, std::vector<T> fallback, F parse) {
  if (!c.has(key)) return fallback;
  std::vector<T> out;
  for (const auto& item : c.get_list(key, {})) {
    try {
      out.push_back(parse(item));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("config key '{}' has an invalid entry '{}'", key, item));
    }
  }
  if (out.empty()) throw ConfigError(fmt::format("config key '{}' is empty", key));
  return out;
}

std::size_t parse_count(const std::string& s) {
  std::size_t used = 0;
  if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return static_cast<std::size_t>(v);
}

template <typename F>
void checked(F&& validate) {
  try {
    validate();
  } catch (const DataError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const Config& c) {
  ExperimentConfig x;
  x.seed = c.get_u64("seed", 0);
  x.output_dir = c.get("output_dir", x.output_dir.string());
  for (const char* key : kPathKeys) {
    if (c.has(key)) x.paths[key] = c.require(key);
  }

  if (c.has("scheme.social_cognitive") || c.has("scheme.affective")) {
    const auto defaults = corpus::LabelScheme::defaults();
    x.scheme.set_classes(Dimension::SocialCognitive,
                         c.get_list("scheme.social_cognitive", defaults.classes(Dimension::SocialCognitive)));
    x.scheme.set_classes(Dimension::Affective,
                         c.get_list("scheme.affective", defaults.classes(Dimension::Affective)));
  }

  x.split.test_fraction = c.get_double("split.test_fraction", x.split.test_fraction);
  x.split.val_fraction = c.get_double("split.val_fraction", x.split.val_fraction);
  x.split.min_class_instances = c.get_size("split.min_class_instances", x.split.min_class_instances);
  x.split.cv_folds = c.get_size("split.cv_folds", x.split.cv_folds);
  x.split.seed = x.seed;
  checked([&] { x.split.validate(); });

  auto& a = x.acoustic;
  a.frame_step_ms = c.get_double("acoustic.frame_step_ms", a.frame_step_ms);
  a.frame_length_ms = c.get_double("acoustic.frame_length_ms", a.frame_length_ms);
  a.f0_min = c.get_double("acoustic.f0_min", a.f0_min);
  a.f0_max = c.get_double("acoustic.f0_max", a.f0_max);
  a.voicing_threshold = c.get_double("acoustic.voicing_threshold", a.voicing_threshold);
  a.feature_names = c.get_list("acoustic.feature_names", a.feature_names);
  checked([&] { a.validate(); });

  auto& g = x.grid;
  g.n_trees = parse_list<std::size_t>(c, "rf.n_trees", g.n_trees, parse_count);
  g.max_depth = parse_list<std::optional<std::size_t>>(
      c, "rf.max_depth", g.max_depth, [](const std::string& s) -> std::optional<std::size_t> {
        if (s == "none") return std::nullopt;
        return parse_count(s);
      });
  g.min_samples_leaf = parse_list<std::size_t>(c, "rf.min_samples_leaf", g.min_samples_leaf, parse_count);
  g.max_features = parse_list<classical::MaxFeatures>(
      c, "rf.max_features", g.max_features,
      [](const std::string& s) { return classical::MaxFeatures::parse(s); });
  g.folds = x.split.cv_folds;
  x.rf_base.bootstrap = c.get_bool("rf.bootstrap", true);
  x.rf_base.seed = x.seed;
  checked([&] {
    for (const auto& candidate : g.candidates(x.rf_base)) candidate.validate();
  });

  auto& t = x.train;
  t.epochs = c.get_size("train.epochs", t.epochs);
  t.batch_size = c.get_size("train.batch_size", t.batch_size);
  t.lr = c.get_double("train.lr", t.lr);
  t.adam_eps = c.get_double("train.adam_eps", t.adam_eps);
  t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
  t.val_fraction = x.split.val_fraction;
  t.seed = x.seed;
  checked([&] { t.validate(); });
  x.text_hidden = c.get_size("train.text_hidden", x.text_hidden);
  x.audio_hidden = c.get_size("train.audio_hidden", x.audio_hidden);
  if (x.text_hidden == 0 || x.audio_hidden == 0) throw ConfigError("hidden sizes must be positive");
  x.transfer = c.get_bool("train.transfer", x.transfer);

  x.text_encoder.dimension = c.get_size("encode.text_dim", x.text_encoder.dimension);
  x.text_encoder.seed = derive_seed(x.seed, 0x74657874ULL);
  x.audio_encoder.dimension = c.get_size("encode.audio_dim", x.audio_encoder.dimension);
  x.audio_encoder.window = c.get_size("encode.window", x.audio_encoder.window);
  x.audio_encoder.seed = derive_seed(x.seed, 0x617564ULL);
  checked([&] {
    x.text_encoder.validate();
    x.audio_encoder.validate();
  });

  if (c.has("models")) {
    x.models.clear();
    for (const auto& name : c.get_list("models", {})) {
      const auto m = parse_model(name);
      if (std::find(x.models.begin(), x.models.end(), m) != x.models.end()) {
        throw ConfigError(fmt::format("model '{}' listed twice", name));
      }
      x.models.push_back(m);
    }
    if (x.models.empty()) throw ConfigError("config key 'models' is empty");
  }
  return x;
}

const fs::path& ExperimentConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end()) throw ConfigError(fmt::format("missing config key '{}'", key));
  return it->second;
}

const fs::path& ExperimentConfig::existing(const std::string& key) const {
  const auto& p = path(key);
  if (!fs::exists(p)) throw DataError(fmt::format("{} '{}' does not exist", key, p.string()));
  return p;
}

// ---------------------------------------------------------------------------
// Inputs

ExperimentInputs load_inputs(const ExperimentConfig& config, std::span<const ModelKind> models) {
  const bool features = std::any_of(models.begin(), models.end(), needs_features);
  const bool text = std::any_of(models.begin(), models.end(), needs_text_embeddings);
  const bool audio = std::any_of(models.begin(), models.end(), needs_audio_embeddings);
  // Resolve every path first so a missing key or file is reported before any parsing.
  const auto& corpus_path = config.existing("corpus");
  if (features) config.existing("features");
  if (text) config.existing("text_embeddings");
  if (audio) config.existing("audio_embeddings");

  ExperimentInputs in;
  in.corpus = corpus::load_corpus(corpus_path, config.scheme);
  if (features) {
    for (auto& row : acoustic::read_feature_csv(config.path("features"))) {
      if (!in.features.emplace(row.id, row.values).second) {
        throw DataError(fmt::format("features: duplicate row id '{}'", row.id));
      }
    }
  }
  auto read_store = [&](const char* key, embedio::Modality expected) {
    auto store = embedio::read_embeddings(config.path(key));
    if (store.modality() != expected) {
      throw DataError(fmt::format("{}: expected {} embeddings, file holds {}", key,
                                  embedio::to_string(expected), embedio::to_string(store.modality())));
    }
    return store;
  };
  if (text) in.text = read_store("text_embeddings", embedio::Modality::Text);
  if (audio) in.audio = read_store("audio_embeddings", embedio::Modality::Audio);
  return in;
}

std::vector<DimensionData> prepare_dimensions(const corpus::Corpus& corpus,
                                              const ExperimentConfig& config) {
  const auto parts = corpus::partition_by_dimension(corpus::explode_multicoded(corpus, config.scheme));
  std::vector<DimensionData> out;
  for (auto d : corpus::kAllDimensions) {
    const auto& all = parts.of(d);
    if (all.empty()) continue;
    DimensionData data;
    data.dimension = d;
    auto kept = corpus::filter_rare_classes(all, config.split.min_class_instances);
    const auto before = config.scheme.present(d, corpus::labels_of(all));
    data.classes = config.scheme.present(d, corpus::labels_of(kept));
    for (const auto& c : before) {
      if (std::find(data.classes.begin(), data.classes.end(), c) == data.classes.end()) {
        data.dropped_classes.push_back(c);
      }
    }
    if (data.classes.size() < 2) {
      throw DataError(fmt::format("{}: fewer than two classes survive the rare-class filter",
                                  corpus::to_string(d)));
    }
    const auto split = corpus::stratified_split(kept, config.split);
    data.train = corpus::select(kept, split.train);
    data.test = corpus::select(kept, split.test);
    out.push_back(std::move(data));
  }
  if (out.empty()) throw DataError("corpus has no coded utterances");
  return out;
}

std::string split_csv(const DimensionData& data) {
  std::string out = "instance_id,class,part\n";
  for (const auto& x : data.train) out += fmt::format("{},{},train\n", x.id, x.class_label);
  for (const auto& x : data.test) out += fmt::format("{},{},test\n", x.id, x.class_label);
  return out;
}

void check_coverage(const ExperimentInputs& inputs, const std::vector<DimensionData>& dims,
                    std::span<const ModelKind> models) {
  std::set<std::string> used;
  for (const auto& d : dims) {
    for (const auto* part : {&d.train, &d.test}) {
      for (const auto& x : *part) used.insert(x.utterance.id);
    }
  }
  std::vector<corpus::Record> records;
  for (const auto& r : inputs.corpus.records()) {
    if (used.contains(r.utterance.id)) records.push_back(r);
  }
  // Codes were validated on load; the sub-corpus only needs the utterances.
  for (auto& r : records) r.codes.clear();
  const auto subset = corpus::Corpus::from_records(std::move(records));

  auto fail = [](const std::string& what, const std::vector<std::string>& missing) {
    const std::size_t shown = std::min<std::size_t>(missing.size(), 5);
    throw DataError(fmt::format("{} missing for {} utterance(s): {}{}", what, missing.size(),
                                fmt::join(missing.begin(), missing.begin() + static_cast<std::ptrdiff_t>(shown), ", "),
                                missing.size() > shown ? ", ..." : ""));
  };
  const bool features = std::any_of(models.begin(), models.end(), needs_features);
  if (features) {
    std::vector<std::string> missing;
    for (const auto& r : subset.records()) {
      if (!inputs.features.contains(r.utterance.id)) missing.push_back(r.utterance.id);
    }
    if (!missing.empty()) fail("acoustic features", missing);
  }
  if (inputs.text && std::any_of(models.begin(), models.end(), needs_text_embeddings)) {
    const auto report = embedio::align(subset, *inputs.text, embedio::AlignKey::Id);
    if (!report.complete()) fail("text embeddings", report.missing_from_store);
  }
  if (inputs.audio && std::any_of(models.begin(), models.end(), needs_audio_embeddings)) {
    const auto report = embedio::align(subset, *inputs.audio, embedio::AlignKey::AudioRef);
    if (!report.complete()) fail("audio embeddings", report.missing_from_store);
  }
}

// ---------------------------------------------------------------------------
// Training and prediction

std::uint64_t model_seed(const ExperimentConfig& config, Dimension d) {
  return derive_seed(config.seed, d == Dimension::SocialCognitive ? 11 : 12);
}

namespace {

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

std::string cv_csv(const classical::CvReport& report) {
  std::string out = "n_trees,max_depth,min_samples_leaf,max_features,bootstrap,fold_accuracy,mean_accuracy,selected\n";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    std::vector<std::string> folds;
    for (double a : e.fold_accuracy) folds.push_back(fixed(a));
    out += fmt::format("{},{},{},{},{},{},{},{}\n", e.config.n_trees,
                       e.config.max_depth ? std::to_string(*e.config.max_depth) : "none",
                       e.config.min_samples_leaf, e.config.max_features.to_string(),
                       e.config.bootstrap ? "true" : "false", fmt::join(folds, ";"),
                       fixed(e.mean_accuracy), i == report.best ? "yes" : "no");
  }
  return out;
}

std::vector<classical::SparseVector> rf_rows(const classical::TfidfModel& tfidf,
                                             const classical::AudioScaler* scaler,
                                             const std::vector<CodedInstance>& xs,
                                             const ExperimentInputs& inputs) {
  std::vector<classical::SparseVector> rows;
  rows.reserve(xs.size());
  for (const auto& x : xs) {
    auto v = tfidf.transform(x.utterance.text);
    if (scaler) {
      auto it = inputs.features.find(x.utterance.id);
      if (it == inputs.features.end()) {
        throw DataError(fmt::format("acoustic features missing for '{}'", x.utterance.id));
      }
      v = classical::concat_features(v, it->second, *scaler);
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

std::vector<fusenet::NeuralInstance> neural_instances(const std::vector<CodedInstance>& xs,
                                                      const ExperimentInputs& inputs,
                                                      bool with_audio) {
  std::vector<fusenet::NeuralInstance> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    fusenet::NeuralInstance n;
    n.id = x.id;
    n.label = x.class_label;
    n.text = inputs.text ? inputs.text->find(x.utterance.id) : nullptr;
    if (!n.text) throw DataError(fmt::format("text embedding missing for '{}'", x.utterance.id));
    if (with_audio) {
      n.audio = inputs.audio && x.utterance.audio_ref ? inputs.audio->find(*x.utterance.audio_ref) : nullptr;
      if (!n.audio) throw DataError(fmt::format("audio embedding missing for '{}'", x.utterance.id));
    }
    out.push_back(std::move(n));
  }
  return out;
}

fusenet::ModelDims model_dims(const ExperimentInputs& inputs, const ExperimentConfig& config) {
  fusenet::ModelDims dims;
  if (inputs.text) dims.text_dim = inputs.text->dimension();
  if (inputs.audio) dims.audio_dim = inputs.audio->dimension();
  dims.text_hidden = config.text_hidden;
  dims.audio_hidden = config.audio_hidden;
  return dims;
}

template <typename Model>
TrainedModel fit_neural(Model& model, const DimensionData& data, const ExperimentInputs& inputs,
                        const ExperimentConfig& config, bool with_audio) {
  const auto xs = neural_instances(data.train, inputs, with_audio);
  auto tc = config.train;
  tc.seed = model_seed(config, data.dimension);
  auto result = fusenet::train(model, xs, tc);
  const std::size_t epoch = fusenet::select_epoch(result.records);
  fusenet::restore(model, result.snapshots.at(epoch - 1));
  TrainedModel out;
  out.checkpoint = fusenet::to_checkpoint(model);
  out.checkpoint.put_ints("train.selected_epoch", {static_cast<std::int64_t>(epoch)});
  out.log_suffix = "epochs";
  out.log_csv = fusenet::epoch_log_csv(result.records);
  return out;
}

std::vector<std::string> sorted_train_classes(const DimensionData& data) {
  std::set<std::string> s;
  for (const auto& x : data.train) s.insert(x.class_label);
  return {s.begin(), s.end()};
}

}  // namespace

TrainedModel train_model(ModelKind kind, const DimensionData& data, const ExperimentInputs& inputs,
                         const ExperimentConfig& config, const binio::Container* donor_text) {
  const auto seed = model_seed(config, data.dimension);
  switch (kind) {
    case ModelKind::RfTfidf:
    case ModelKind::RfTfidfAudio: {
      const bool audio = kind == ModelKind::RfTfidfAudio;
      std::vector<std::string> texts;
      for (const auto& x : data.train) texts.push_back(x.utterance.text);
      const auto tfidf = classical::fit_tfidf(texts, classical::english_stopwords());
      std::optional<classical::AudioScaler> scaler;
      if (audio) {
        std::vector<acoustic::AcousticFeatureVector> rows;
        for (const auto& x : data.train) {
          auto it = inputs.features.find(x.utterance.id);
          if (it == inputs.features.end()) {
            throw DataError(fmt::format("acoustic features missing for '{}'", x.utterance.id));
          }
          rows.push_back(it->second);
        }
        scaler = classical::AudioScaler::fit(rows);
      }
      const auto X = rf_rows(tfidf, scaler ? &*scaler : nullptr, data.train, inputs);
      auto base = config.rf_base;
      base.seed = seed;
      const auto result = classical::grid_search_cv(X, corpus::labels_of(data.train), config.grid, base, seed);
      TrainedModel out;
      out.checkpoint.put_strings("model.kind", {std::string(model_name(kind))});
      out.checkpoint.put_strings("model.selected", {result.best.describe()});
      tfidf.save(out.checkpoint, "tfidf");
      if (scaler) scaler->save(out.checkpoint, "scaler");
      result.model.save(out.checkpoint, "forest");
      out.log_suffix = "cv";
      out.log_csv = cv_csv(result.report);
      return out;
    }
    case ModelKind::NeuralText: {
      fusenet::TextClassifier model(sorted_train_classes(data), model_dims(inputs, config), seed);
      return fit_neural(model, data, inputs, config, false);
    }
    case ModelKind::NeuralFusion: {
      fusenet::FusionClassifier model(sorted_train_classes(data), model_dims(inputs, config), seed);
      if (config.transfer) {
        if (!donor_text) throw Error("transfer requires a trained neural_text checkpoint");
        fusenet::transfer_init(model, fusenet::load_text_checkpoint(*donor_text));
      }
      return fit_neural(model, data, inputs, config, true);
    }
  }
  throw Error("unreachable model kind");
}

std::vector<std::string> predict_model(ModelKind kind, const binio::Container& checkpoint,
                                       const std::vector<CodedInstance>& instances,
                                       const ExperimentInputs& inputs) {
  std::vector<std::string> out;
  switch (kind) {
    case ModelKind::RfTfidf:
    case ModelKind::RfTfidfAudio: {
      const auto tfidf = classical::TfidfModel::load(checkpoint, "tfidf");
      std::optional<classical::AudioScaler> scaler;
      if (kind == ModelKind::RfTfidfAudio) scaler = classical::AudioScaler::load(checkpoint, "scaler");
      const auto forest = classical::RandomForestModel::load(checkpoint, "forest");
      for (const auto& p : forest.predict(rf_rows(tfidf, scaler ? &*scaler : nullptr, instances, inputs))) {
        out.push_back(p.label);
      }
      return out;
    }
    case ModelKind::NeuralText: {
      auto model = fusenet::load_text_checkpoint(checkpoint);
      for (const auto& x : neural_instances(instances, inputs, false)) {
        out.push_back(fusenet::predict_neural(model, x).label);
      }
      return out;
    }
    case ModelKind::NeuralFusion: {
      auto model = fusenet::load_fusion_checkpoint(checkpoint);
      for (const auto& x : neural_instances(instances, inputs, true)) {
        out.push_back(fusenet::predict_neural(model, x).label);
      }
      return out;
    }
  }
  throw Error("unreachable model kind");
}

// ---------------------------------------------------------------------------
// Outputs

void OutputTree::add(const fs::path& relative, std::string content) {
  if (!files_.emplace(relative, std::move(content)).second) {
    throw Error(fmt::format("output '{}' produced twice", relative.string()));
  }
}

void OutputTree::add(const fs::path& relative, const std::vector<std::uint8_t>& bytes) {
  add(relative, std::string(bytes.begin(), bytes.end()));
}

void OutputTree::write(const fs::path& root) const {
  for (const auto& [rel, content] : files_) {
    const auto target = root / rel;
    fs::create_directories(target.parent_path());
    std::ofstream f(target, std::ios::binary | std::ios::trunc);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(fmt::format("cannot write '{}'", target.string()));
  }
}

std::string artifact_stem(ModelKind kind, Dimension d) {
  return fmt::format("{}_{}", model_name(kind), corpus::to_string(d));
}

std::string confusion_csv(const metrics::ConfusionMatrix& cm) {
  std::string out = fmt::format("true\\predicted,{}\n", fmt::join(cm.classes, ","));
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out += fmt::format("{},{}\n", cm.classes[i], fmt::join(cm.counts[i], ","));
  }
  return out;
}

metrics::Evaluation add_evaluation(OutputTree& out, ModelKind kind, const DimensionData& data,
                                   const std::vector<std::string>& predicted) {
  auto eval = metrics::weighted_metrics(corpus::labels_of(data.test), predicted, data.classes);
  const auto stem = artifact_stem(kind, data.dimension);
  out.add(fs::path("reports") / (stem + "_report.csv"), metrics::classification_report_csv(eval));
  out.add(fs::path("reports") / (stem + "_confusion.csv"), confusion_csv(eval.confusion));
  out.add(fs::path("heatmaps") / (stem + ".svg"),
          metrics::heatmap_svg(metrics::row_normalize(eval.confusion), data.classes,
                               fmt::format("{} / {}", model_name(kind), corpus::to_string(data.dimension))));
  return eval;
}

// ---------------------------------------------------------------------------
// Synthesis

synthlab::SynthSpec synth_spec_from_config(const Config& c, const corpus::LabelScheme& scheme,
                                           std::uint64_t seed) {
  const auto mode = [&] {
    try {
      return synthlab::parse_channel_mode(c.get("synth.mode", "text_only"));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }();
  const auto preset = c.get("synth.preset", "reference");
  synthlab::SynthSpec spec;
  if (preset == "reference") {
    checked([&] { spec = synthlab::reference_preset(mode, seed, c.get_double("synth.scale", 1.0)); });
  } else if (preset == "custom") {
    const auto& entries = split_list(c.require("synth.classes"));
    const auto per_class = c.get_size("synth.keywords_per_class", 4);
    const auto n_fillers = c.get_size("synth.fillers", 60);
    const auto audio_only = c.get_list("synth.audio_only", {});
    const auto words = synthlab::pseudo_words(entries.size() * per_class * 2 + n_fillers,
                                              derive_seed(seed, 0x637573ULL));
    spec.mode = mode;
    spec.seed = seed;
    std::size_t w = 0;
    for (const auto& entry : entries) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) {
        throw ConfigError(fmt::format("synth.classes entry '{}' is not CODE:COUNT", entry));
      }
      synthlab::ClassSpec cls;
      cls.code = entry.substr(0, colon);
      if (scheme.contains(Dimension::SocialCognitive, cls.code)) {
        cls.dimension = Dimension::SocialCognitive;
      } else if (scheme.contains(Dimension::Affective, cls.code)) {
        cls.dimension = Dimension::Affective;
      } else {
        throw ConfigError(fmt::format("synth.classes code '{}' is not in the label scheme", cls.code));
      }
      try {
        cls.count = parse_count(entry.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("synth.classes entry '{}' has an invalid count", entry));
      }
      for (std::size_t p = 0; p < per_class; ++p, w += 2) cls.keywords.push_back(words[w] + " " + words[w + 1]);
      cls.audio_only_signal = std::find(audio_only.begin(), audio_only.end(), cls.code) != audio_only.end();
      spec.classes.push_back(std::move(cls));
    }
    spec.fillers.assign(words.begin() + static_cast<std::ptrdiff_t>(w), words.end());
  } else {
    throw ConfigError(fmt::format("synth.preset must be reference or custom, got '{}'", preset));
  }
  spec.keyword_noise = c.get_double("synth.noise", spec.keyword_noise);
  spec.min_fillers = c.get_size("synth.min_fillers", spec.min_fillers);
  spec.max_fillers = c.get_size("synth.max_fillers", spec.max_fillers);
  checked([&] { spec.validate(); });
  return spec;
}

synthlab::SynthAudioSpec synth_audio_from_config(const Config& c, const synthlab::SynthSpec& spec) {
  std::vector<std::string> codes;
  for (const auto& cls : spec.classes) codes.push_back(cls.code);
  auto audio = synthlab::SynthAudioSpec::for_classes(codes);
  audio.duration_s = c.get_double("synth.duration_s", audio.duration_s);
  audio.snr_db = c.get_double("synth.snr_db", audio.snr_db);
  audio.f0_jitter = c.get_double("synth.f0_jitter", audio.f0_jitter);
  checked([&] { audio.validate(spec); });
  return audio;
}

}  // namespace cpsfuse::cli

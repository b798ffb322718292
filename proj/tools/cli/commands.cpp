#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "config.hpp"
#include "cpsfuse/agreement.hpp"
#include "cpsfuse/audio.hpp"
#include "cpsfuse/masking.hpp"
#include "cpsfuse/parallel.hpp"
#include "pipeline.hpp"

namespace cpsfuse::cli {

namespace fs = std::filesystem;
using corpus::Dimension;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config file (key = value, schema_version = 1)")
      ->required();
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--out", o.out, "Override the output directory");
  cmd->add_option("--set", o.sets, "Override a config key (key=value); repeatable");
}

Config load_config(const CommonOptions& o) {
  auto c = Config::load(o.config);
  for (const auto& s : o.sets) c.set(s);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  if (!o.out.empty()) c.set("output_dir", o.out);
  return c;
}

// Config dump without the output directory, so runs into different
// directories still produce identical logs.
std::string config_echo(const Config& c) {
  std::string out;
  std::size_t pos = 0;
  const auto text = c.dump();
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    const auto line = text.substr(pos, end - pos + 1);
    if (line.rfind("output_dir ", 0) != 0) out += line;
    pos = end + 1;
  }
  return out;
}

std::string record_lines(const corpus::Corpus& c) {
  std::string out;
  for (const auto& r : c.records()) out += corpus::format_record(r) + "\n";
  return out;
}

std::string split_summary(const DimensionData& d) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& x : d.train) ++counts[x.class_label].first;
  for (const auto& x : d.test) ++counts[x.class_label].second;
  std::string out = fmt::format("{}: {} train, {} test\n", corpus::to_string(d.dimension), d.train.size(),
                                d.test.size());
  for (const auto& c : d.classes) {
    out += fmt::format("  {:<6} train {:>5}  test {:>5}\n", c, counts[c].first, counts[c].second);
  }
  if (!d.dropped_classes.empty()) {
    out += fmt::format("  dropped (rare): {}\n", fmt::join(d.dropped_classes, ", "));
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Config& c, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto spec = synth_spec_from_config(c, x.scheme, x.seed);
  const auto audio_spec = synth_audio_from_config(c, spec);
  const auto gen = synthlab::generate_corpus(spec, audio_spec);
  OutputTree tree;
  tree.add("corpus.jsonl", record_lines(gen.corpus));
  tree.add("gold.csv", synthlab::gold_csv(gen.corpus));
  tree.write(x.output_dir);
  if (!gen.clips.empty()) {
    fs::create_directories(x.output_dir / "audio");
    for (const auto& [ref, clip] : gen.clips) audio::write_wav(x.output_dir / "audio" / ref, clip);
  }
  out << fmt::format("synth: {} utterances, {} clips ({}) -> {}\n", gen.corpus.size(), gen.clips.size(),
                     synthlab::to_string(spec.mode), x.output_dir.string());
  return kExitOk;
}

int cmd_mask(const Config& c, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto corpus = corpus::load_corpus(x.existing("corpus"), x.scheme);
  const auto lexicon = corpus::load_mask_lexicon(x.existing("mask.lexicon"));
  std::map<std::string, std::string> overrides;
  if (x.paths.contains("mask.overrides")) overrides = corpus::load_mask_overrides(x.existing("mask.overrides"));
  for (const auto& [id, text] : overrides) {
    if (!corpus.find(id)) throw DataError(fmt::format("mask.overrides: unknown utterance id '{}'", id));
  }
  const auto masked = corpus::apply_masks(corpus, lexicon, overrides);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.records()[i].utterance.text != masked.records()[i].utterance.text) ++changed;
  }
  OutputTree tree;
  tree.add("corpus_masked.jsonl", record_lines(masked));
  tree.write(x.output_dir);
  out << fmt::format("mask: {} of {} utterances changed\n", changed, corpus.size());
  return kExitOk;
}

int cmd_split(const Config& c, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto corpus = corpus::load_corpus(x.existing("corpus"), x.scheme);
  const auto dims = prepare_dimensions(corpus, x);
  OutputTree tree;
  for (const auto& d : dims) {
    tree.add(fs::path("logs") / fmt::format("splits_{}.csv", corpus::to_string(d.dimension)), split_csv(d));
    out << split_summary(d);
  }
  tree.write(x.output_dir);
  return kExitOk;
}

int cmd_features(const Config& c, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto corpus = corpus::load_corpus(x.existing("corpus"), x.scheme);
  const auto& audio_dir = x.existing("audio_dir");
  std::vector<const corpus::Record*> with_audio;
  for (const auto& r : corpus.records()) {
    if (r.utterance.audio_ref) with_audio.push_back(&r);
  }
  if (with_audio.empty()) throw DataError("corpus has no utterances with audio_ref");
  std::vector<acoustic::FeatureRow> rows(with_audio.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const auto& u = with_audio[i]->utterance;
    rows[i].id = u.id;
    rows[i].values = acoustic::extract_features(audio::read_wav(audio_dir / *u.audio_ref), x.acoustic);
  });
  fs::create_directories(x.output_dir);
  acoustic::write_feature_csv(x.output_dir / "features.csv", x.acoustic.feature_names, rows);
  out << fmt::format("features: {} clips -> {}\n", rows.size(), (x.output_dir / "features.csv").string());
  return kExitOk;
}

int cmd_encode(const Config& c, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto corpus = corpus::load_corpus(x.existing("corpus"), x.scheme);

  const auto& records = corpus.records();
  std::vector<grad::Tensor> text(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    text[i] = embedio::toy_text_encode(records[i].utterance.text, x.text_encoder);
  });
  embedio::EmbeddingStore text_store(embedio::Modality::Text, x.text_encoder.dimension, "toy_text");
  for (std::size_t i = 0; i < records.size(); ++i) text_store.insert(records[i].utterance.id, std::move(text[i]));

  std::set<std::string> refs;
  for (const auto& r : records) {
    if (r.utterance.audio_ref) refs.insert(*r.utterance.audio_ref);
  }
  std::optional<embedio::EmbeddingStore> audio_store;
  if (!refs.empty() && x.paths.contains("audio_dir")) {
    const auto& audio_dir = x.existing("audio_dir");
    const std::vector<std::string> ordered(refs.begin(), refs.end());
    std::vector<grad::Tensor> seqs(ordered.size());
    parallel_for(ordered.size(), [&](std::size_t i) {
      seqs[i] = embedio::toy_audio_encode(audio::read_wav(audio_dir / ordered[i]), x.acoustic, x.audio_encoder);
    });
    audio_store.emplace(embedio::Modality::Audio, x.audio_encoder.dimension, "toy_audio");
    for (std::size_t i = 0; i < ordered.size(); ++i) audio_store->insert(ordered[i], std::move(seqs[i]));
  }

  OutputTree tree;
  tree.add(fs::path("embeddings") / "text.emb1", embedio::serialize(text_store));
  if (audio_store) tree.add(fs::path("embeddings") / "audio.emb1", embedio::serialize(*audio_store));
  tree.write(x.output_dir);
  out << fmt::format("encode: {} text sequences, {} audio sequences -> {}\n", text_store.size(),
                     audio_store ? audio_store->size() : 0, (x.output_dir / "embeddings").string());
  return kExitOk;
}

binio::Container read_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw DataError(fmt::format("checkpoint '{}' does not exist", path.string()));
  return binio::Container::read(path);
}

int cmd_train(const Config& c, const std::string& model, std::ostream& out, std::ostream& err) {
  const auto x = ExperimentConfig::from(c);
  const auto kind = parse_model(model);
  const ModelKind selected[] = {kind};
  auto inputs = load_inputs(x, selected);
  const auto dims = prepare_dimensions(inputs.corpus, x);
  check_coverage(inputs, dims, selected);

  OutputTree tree;
  for (const auto& d : dims) {
    std::optional<binio::Container> donor;
    if (kind == ModelKind::NeuralFusion && x.transfer) {
      donor = read_checkpoint(x.output_dir / "checkpoints" /
                              (artifact_stem(ModelKind::NeuralText, d.dimension) + ".cps1"));
    }
    err << fmt::format("train: {} on {} ({} instances)\n", model, corpus::to_string(d.dimension), d.train.size());
    auto trained = train_model(kind, d, inputs, x, donor ? &*donor : nullptr);
    const auto stem = artifact_stem(kind, d.dimension);
    tree.add(fs::path("checkpoints") / (stem + ".cps1"), trained.checkpoint.serialize());
    tree.add(fs::path("logs") / (stem + "_" + trained.log_suffix + ".csv"), trained.log_csv);
    tree.add(fs::path("logs") / fmt::format("splits_{}.csv", corpus::to_string(d.dimension)), split_csv(d));
  }
  tree.write(x.output_dir);
  out << fmt::format("train: {} -> {}\n", model, (x.output_dir / "checkpoints").string());
  return kExitOk;
}

std::string summary_line(ModelKind kind, Dimension d, const metrics::WeightedSummary& s) {
  return fmt::format("{} {} acc {} prec {} rec {} f1 {}\n", model_name(kind), corpus::to_string(d),
                     metrics::table_number(s.accuracy), metrics::table_number(s.precision),
                     metrics::table_number(s.recall), metrics::table_number(s.f1));
}

int cmd_eval(const Config& c, const std::string& model, std::ostream& out) {
  const auto x = ExperimentConfig::from(c);
  const auto kind = parse_model(model);
  const ModelKind selected[] = {kind};
  auto inputs = load_inputs(x, selected);
  const auto dims = prepare_dimensions(inputs.corpus, x);
  check_coverage(inputs, dims, selected);

  OutputTree tree;
  std::string lines;
  for (const auto& d : dims) {
    const auto ckpt = read_checkpoint(x.output_dir / "checkpoints" / (artifact_stem(kind, d.dimension) + ".cps1"));
    const auto eval = add_evaluation(tree, kind, d, predict_model(kind, ckpt, d.test, inputs));
    lines += summary_line(kind, d.dimension, eval.summary);
  }
  tree.write(x.output_dir);
  out << lines;
  return kExitOk;
}

int cmd_compare(const Config& c, std::ostream& out, std::ostream& err) {
  const auto x = ExperimentConfig::from(c);
  if (x.models.size() < 2) throw ConfigError("compare needs at least two models in 'models'");
  const bool fusion = std::find(x.models.begin(), x.models.end(), ModelKind::NeuralFusion) != x.models.end();

  // Every input is loaded and checked before any training or output.
  auto inputs = load_inputs(x, x.models);
  const auto dims = prepare_dimensions(inputs.corpus, x);
  check_coverage(inputs, dims, x.models);

  OutputTree tree;
  std::vector<metrics::CompareInput> rows;
  for (auto m : x.models) rows.push_back({std::string(model_name(m)), {}, {}});
  std::string log = "cpsfuse compare\n\n[config]\n" + config_echo(c) + "\n[splits]\n";
  for (const auto& d : dims) log += split_summary(d);
  log += "\n[models]\n";

  for (const auto& d : dims) {
    tree.add(fs::path("logs") / fmt::format("splits_{}.csv", corpus::to_string(d.dimension)), split_csv(d));
    std::map<ModelKind, TrainedModel> trained;
    auto train_one = [&](ModelKind m) -> const TrainedModel& {
      if (auto it = trained.find(m); it != trained.end()) return it->second;
      const binio::Container* donor = nullptr;
      if (m == ModelKind::NeuralFusion && x.transfer) {
        const auto& text = [&]() -> const TrainedModel& {
          if (auto it = trained.find(ModelKind::NeuralText); it != trained.end()) return it->second;
          err << fmt::format("compare: {} neural_text (transfer donor)\n", corpus::to_string(d.dimension));
          return trained.emplace(ModelKind::NeuralText,
                                 train_model(ModelKind::NeuralText, d, inputs, x, nullptr)).first->second;
        }();
        donor = &text.checkpoint;
      }
      err << fmt::format("compare: {} {}\n", corpus::to_string(d.dimension), model_name(m));
      return trained.emplace(m, train_model(m, d, inputs, x, donor)).first->second;
    };
    if (fusion && x.transfer) {
      // The donor is trained before the fusion model regardless of list order.
      const bool text_listed = std::find(x.models.begin(), x.models.end(), ModelKind::NeuralText) != x.models.end();
      if (text_listed) train_one(ModelKind::NeuralText);
    }
    for (std::size_t i = 0; i < x.models.size(); ++i) {
      const auto m = x.models[i];
      const auto& t = train_one(m);
      const auto stem = artifact_stem(m, d.dimension);
      tree.add(fs::path("checkpoints") / (stem + ".cps1"), t.checkpoint.serialize());
      tree.add(fs::path("logs") / (stem + "_" + t.log_suffix + ".csv"), t.log_csv);
      const auto eval = add_evaluation(tree, m, d, predict_model(m, t.checkpoint, d.test, inputs));
      rows[i].dimensions.emplace_back(corpus::to_string(d.dimension));
      rows[i].summaries.push_back(eval.summary);
      log += summary_line(m, d.dimension, eval.summary);
    }
  }

  const auto table = metrics::compare_models(rows);
  tree.add(fs::path("reports") / "comparison.txt", table.render_text());
  tree.add(fs::path("reports") / "comparison.csv", table.render_csv());
  tree.add(fs::path("logs") / "run.log", log);
  tree.write(x.output_dir);
  out << table.render_text();
  return kExitOk;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

int cmd_wer(const std::string& ref_path, const std::string& hyp_path, std::ostream& out) {
  const auto ref = read_lines(ref_path);
  const auto hyp = read_lines(hyp_path);
  if (ref.size() != hyp.size()) {
    throw DataError(fmt::format("reference has {} lines, hypothesis has {}", ref.size(), hyp.size()));
  }
  std::size_t edits = 0;
  std::size_t words = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto r = corpus::wer_tokens(ref[i]);
    edits += corpus::word_edit_distance(r, corpus::wer_tokens(hyp[i]));
    words += r.size();
  }
  if (words == 0) throw DataError("reference contains no words");
  out << fmt::format("{:.3f}\n", static_cast<double>(edits) / static_cast<double>(words));
  return kExitOk;
}

int cmd_kappa(const std::string& path, std::ostream& out) {
  if (!fs::exists(path)) throw DataError(fmt::format("cannot read '{}'", path));
  out << fmt::format("{:.3f}\n", corpus::cohens_kappa(corpus::load_rater_file(path)));
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cpsfuse: multimodal utterance classification experiments", "cpsfuse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonOptions common;
  std::string model;
  std::string ref_path;
  std::string hyp_path;
  std::string rater_path;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus (corpus.jsonl, gold.csv, audio/)");
  auto* mask = app.add_subcommand("mask", "Apply the masking lexicon (corpus_masked.jsonl)");
  auto* split = app.add_subcommand("split", "Stratified train/test split per dimension (logs/splits_*.csv)");
  auto* features = app.add_subcommand("features", "Extract acoustic features (features.csv)");
  auto* encode = app.add_subcommand("encode", "Toy text/audio embeddings (embeddings/*.emb1)");
  auto* train = app.add_subcommand("train", "Train one model on both dimensions");
  auto* eval = app.add_subcommand("eval", "Evaluate trained checkpoints on the test split");
  auto* compare = app.add_subcommand("compare", "Train and compare all selected models");
  for (auto* cmd : {synth, mask, split, features, encode, train, eval, compare}) add_common(cmd, common);
  for (auto* cmd : {train, eval}) {
    cmd->add_option("model", model, "rf_tfidf | rf_tfidf_audio | neural_text | neural_fusion")->required();
  }
  auto* wer = app.add_subcommand("wer", "Corpus word error rate between line-aligned files");
  wer->add_option("--ref", ref_path, "Reference transcript, one utterance per line")->required();
  wer->add_option("--hyp", hyp_path, "Hypothesis transcript, one utterance per line")->required();
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa from a rater CSV (id,rater_a,rater_b)");
  kappa->add_option("--file", rater_path, "Rater CSV")->required();

  if (!args.empty() && !args[0].empty() && args[0][0] != '-' && !app.get_subcommand_no_throw(args[0])) {
    err << fmt::format("error: unknown subcommand '{}'\n\n", args[0]) << app.help();
    return kExitUsage;
  }

  std::vector<const char*> argv{"cpsfuse"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (*wer) return cmd_wer(ref_path, hyp_path, out);
    if (*kappa) return cmd_kappa(rater_path, out);
    const auto config = load_config(common);
    if (*synth) return cmd_synth(config, out);
    if (*mask) return cmd_mask(config, out);
    if (*split) return cmd_split(config, out);
    if (*features) return cmd_features(config, out);
    if (*encode) return cmd_encode(config, out);
    if (*train) return cmd_train(config, model, out, err);
    if (*eval) return cmd_eval(config, model, out);
    if (*compare) return cmd_compare(config, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace cpsfuse::cli

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "commands.hpp"
#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/agreement.hpp"
#include "cpsfuse/corpus.hpp"
#include "cpsfuse/fusenet.hpp"
#include "cpsfuse/metrics.hpp"
#include "cpsfuse/rng.hpp"
#include "cpsfuse/split.hpp"
#include "gradcases.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cpsfuse;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradTolerance = 1e-4;
constexpr double kMetricTolerance = 1e-12;
constexpr int kMetricCases = 1000;
constexpr std::size_t kMetricMaxClasses = 13;
constexpr std::size_t kMetricMaxInstances = 500;
constexpr double kKappaTolerance = 1e-12;
constexpr int kKappaTables = 200;
constexpr long kSplitSlack = 1;
constexpr double kUnimodalNeuralAccuracy = 0.90;
constexpr double kUnimodalForestAccuracy = 0.85;
constexpr double kUnimodalCollapseShare = 0.60;
constexpr std::size_t kUnimodalMinTruePositiveClasses = 7;
constexpr double kFusionMinGain = 0.15;
constexpr double kRmsRelTolerance = 0.01;
constexpr double kPitchToleranceHz = 5.0;
constexpr double kHnrGapDb = 20.0;
constexpr double kScaleRelTolerance = 1e-6;
constexpr double kRowSumTolerance = 0.005;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back(what);
    }
  }
  Outcome done(const std::string& summary) const {
    if (ok) return {true, summary};
    std::string d = summary;
    for (std::size_t i = 0; i < notes.size() && i < 5; ++i) d += "; " + notes[i];
    if (notes.size() > 5) d += fmt::format("; ... {} more", notes.size() - 5);
    return {false, d};
  }
};

// Runs the CLI in-process; throws on a nonzero exit.
std::string cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  if (code != 0) throw std::runtime_error(fmt::format("cpsfuse {} exited {}: {}", args.at(0), code, err.str()));
  return out.str();
}

void run_pipeline(const fs::path& config, const fs::path& data, bool with_audio) {
  cli({"synth", "--config", config.string(), "--out", data.string()});
  if (with_audio) cli({"features", "--config", config.string(), "--out", data.string()});
  cli({"encode", "--config", config.string(), "--out", data.string()});
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

struct Confusion {
  std::vector<std::string> classes;
  std::vector<std::vector<double>> counts;

  std::size_t index(const std::string& c) const {
    const auto it = std::find(classes.begin(), classes.end(), c);
    if (it == classes.end()) throw std::runtime_error("class " + c + " missing from confusion matrix");
    return static_cast<std::size_t>(it - classes.begin());
  }
  double row_total(std::size_t i) const {
    double s = 0;
    for (double v : counts[i]) s += v;
    return s;
  }
  double accuracy() const {
    double t = 0, n = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      t += counts[i][i];
      n += row_total(i);
    }
    return n > 0 ? t / n : 0.0;
  }
  std::size_t classes_with_true_positive() const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) k += counts[i][i] > 0;
    return k;
  }
};

Confusion read_confusion(const fs::path& path) {
  std::istringstream in(oracle::read_text(path));
  std::string line;
  std::getline(in, line);
  Confusion c;
  const auto header = split_commas(line);
  c.classes.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(std::stod(cells[j]));
    if (row.size() != c.classes.size()) throw std::runtime_error("ragged confusion matrix in " + path.string());
    c.counts.push_back(std::move(row));
  }
  return c;
}

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
  Check check;
  double worst = 0;
  std::size_t coords = 0;
  const auto cases = oracle::fusenet_gradient_cases(2024);
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_relative_error);
    coords += c.coordinates;
    check.expect(c.max_relative_error < kGradTolerance, fmt::format("{} error {:.2e}", c.name, c.max_relative_error));
  }
  return check.done(fmt::format("{} cases, {} coordinates, max relative error {:.2e}", cases.size(), coords, worst));
}

Outcome metric_oracles() {
  Check check;
  Rng rng(1000);
  double worst = 0;
  for (int trial = 0; trial < kMetricCases; ++trial) {
    const std::size_t k = 1 + rng.below(kMetricMaxClasses);
    const std::size_t n = 1 + rng.below(kMetricMaxInstances);
    std::vector<std::string> classes;
    for (std::size_t c = 0; c < k; ++c) classes.push_back(fmt::format("K{:02d}", c));
    // Skewed class draws so some classes are rare or absent.
    std::vector<std::string> truth, pred;
    const double skill = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = std::min(k - 1, static_cast<std::size_t>(k * rng.uniform() * rng.uniform()));
      truth.push_back(classes[t]);
      pred.push_back(rng.uniform() < skill ? classes[t] : classes[rng.below(k)]);
    }
    const auto e = metrics::weighted_metrics(truth, pred, classes);
    const auto b = oracle::brute_metrics(truth, pred, classes);
    for (const auto& [x, y] : {std::pair{e.summary.accuracy, b.accuracy}, {e.summary.precision, b.precision},
                               {e.summary.recall, b.recall}, {e.summary.f1, b.f1}}) {
      worst = std::max(worst, std::abs(x - y));
    }
    check.expect(std::abs(e.summary.accuracy - b.accuracy) <= kMetricTolerance &&
                     std::abs(e.summary.precision - b.precision) <= kMetricTolerance &&
                     std::abs(e.summary.recall - b.recall) <= kMetricTolerance &&
                     std::abs(e.summary.f1 - b.f1) <= kMetricTolerance,
                 fmt::format("case {} differs from the oracle", trial));
    check.expect(e.confusion.counts == b.counts, fmt::format("case {} confusion counts differ", trial));
    check.expect(std::abs(e.summary.recall - e.summary.accuracy) <= kMetricTolerance,
                 fmt::format("case {} weighted recall != accuracy", trial));
  }
  return check.done(fmt::format("{} cases, max deviation {:.1e}", kMetricCases, worst));
}

Outcome wer_oracle() {
  Check check;
  const oracle::EditGraph graph;
  const std::vector<std::string> alphabet{"red", "green", "blue"};
  std::vector<std::vector<std::string>> words(graph.node_count());
  for (std::size_t v = 0; v < graph.node_count(); ++v) {
    for (auto s : graph.sequence(v)) words[v].push_back(alphabet[s]);
  }
  std::size_t pairs = 0;
  for (std::size_t src = 0; src < graph.node_count(); ++src) {
    const auto dist = graph.distances_from(src);
    for (std::size_t dst = 0; dst < graph.node_count(); ++dst) {
      ++pairs;
      const auto dp = corpus::word_edit_distance(words[src], words[dst]);
      if (dp != dist[dst]) {
        check.expect(false, fmt::format("pair {}->{}: dp {} vs search {}", src, dst, dp, dist[dst]));
      }
    }
  }
  return check.done(fmt::format("{} sequence pairs, lengths 0..{}", pairs, oracle::EditGraph::kMaxLength));
}

Outcome kappa_oracle() {
  Check check;
  Rng rng(200);
  double worst = 0;
  int tables = 0;
  while (tables < kKappaTables) {
    const std::size_t k = 2 + rng.below(4);
    std::vector<std::vector<std::size_t>> table(k, std::vector<std::size_t>(k));
    std::vector<corpus::RaterPair> pairs;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        table[i][j] = rng.below(i == j ? 40 : 12);
        for (std::size_t r = 0; r < table[i][j]; ++r) {
          pairs.push_back({fmt::format("x{}", pairs.size()), fmt::format("C{}", i), fmt::format("C{}", j)});
        }
      }
    }
    const double expected = oracle::kappa_from_table(table);
    // Degenerate tables (one shared category) have undefined chance correction.
    if (pairs.empty() || std::isnan(expected)) continue;
    ++tables;
    const double got = corpus::cohens_kappa(pairs);
    worst = std::max(worst, std::abs(got - expected));
    check.expect(std::abs(got - expected) <= kKappaTolerance, fmt::format("table {}: {} vs {}", tables, got, expected));
  }
  for (std::size_t k = 2; k <= 5; ++k) {
    std::vector<corpus::RaterPair> same;
    for (std::size_t i = 0; i < 4 * k; ++i) same.push_back({fmt::format("p{}", i), fmt::format("C{}", i % k), fmt::format("C{}", i % k)});
    check.expect(corpus::cohens_kappa(same) == 1.0, fmt::format("perfect agreement with {} classes is not 1", k));
  }
  return check.done(fmt::format("{} tables, max deviation {:.1e}, perfect agreement = 1", tables, worst));
}

Outcome split_arithmetic() {
  Check check;
  struct Row {
    const char* code;
    corpus::Dimension dim;
    std::size_t total, train, test;
  };
  using D = corpus::Dimension;
  // Class totals with the reference train/test counts.
  const std::vector<Row> rows = {
      {"SS1", D::SocialCognitive, 215, 172, 43},  {"SS2", D::SocialCognitive, 1223, 978, 245},
      {"SS3", D::SocialCognitive, 349, 279, 70},  {"SS4", D::SocialCognitive, 27, 21, 6},
      {"SS5", D::SocialCognitive, 94, 75, 19},    {"SS6", D::SocialCognitive, 126, 101, 25},
      {"SS7", D::SocialCognitive, 22, 18, 4},     {"SS8", D::SocialCognitive, 51, 41, 10},
      {"SC1", D::SocialCognitive, 1590, 1272, 318}, {"SC2", D::SocialCognitive, 859, 687, 172},
      {"AS1", D::Affective, 569, 455, 114},       {"AS2", D::Affective, 920, 736, 184},
      {"AS3", D::Affective, 39, 31, 8}};
  std::vector<corpus::CodedInstance> instances;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.total; ++i) {
      corpus::CodedInstance x;
      x.id = fmt::format("{}_{:04d}#0", r.code, i);
      x.dimension = r.dim;
      x.class_label = r.code;
      instances.push_back(std::move(x));
    }
  }
  corpus::SplitSpec spec;
  spec.test_fraction = 0.2;
  spec.seed = 5;
  long worst = 0;
  const auto parts = corpus::partition_by_dimension(instances);
  for (auto d : {D::SocialCognitive, D::Affective}) {
    const auto s = corpus::stratified_split(parts.of(d), spec);
    std::map<std::string, std::size_t> train, test;
    for (const auto& id : s.train) ++train[id.substr(0, 3)];
    for (const auto& id : s.test) ++test[id.substr(0, 3)];
    for (const auto& r : rows) {
      if (r.dim != d) continue;
      const long dtr = static_cast<long>(train[r.code]) - static_cast<long>(r.train);
      const long dte = static_cast<long>(test[r.code]) - static_cast<long>(r.test);
      worst = std::max({worst, std::abs(dtr), std::abs(dte)});
      check.expect(std::abs(dtr) <= kSplitSlack && std::abs(dte) <= kSplitSlack,
                   fmt::format("{}: {}/{} vs {}/{}", r.code, train[r.code], test[r.code], r.train, r.test));
      check.expect(train[r.code] + test[r.code] == r.total, fmt::format("{} lost instances", r.code));
    }
  }

  std::vector<corpus::CodedInstance> small;
  for (const auto& [code, n] : {std::pair{"SS1", 9}, {"SS2", 10}, {"SS3", 11}}) {
    for (int i = 0; i < n; ++i) {
      corpus::CodedInstance x;
      x.id = fmt::format("{}_{}#0", code, i);
      x.class_label = code;
      small.push_back(std::move(x));
    }
  }
  const auto kept = corpus::filter_rare_classes(small, 10);
  std::map<std::string, std::size_t> kept_counts;
  for (const auto& x : kept) ++kept_counts[x.class_label];
  check.expect(!kept_counts.contains("SS1"), "class of 9 was kept");
  check.expect(kept_counts["SS2"] == 10, "class of exactly 10 was not kept");
  check.expect(kept_counts["SS3"] == 11, "class of 11 was not kept");
  return check.done(fmt::format("13 classes, max deviation {}; 9 dropped, 10 kept", worst));
}

Outcome unimodal_learnability() {
  Check check;
  oracle::TempDir dir("acc_unimodal");
  const auto data = dir / "data";
  oracle::write_text(dir / "run.cfg", fmt::format(
      "schema_version = 1\nseed = 7\n"
      "corpus = {0}/corpus.jsonl\ntext_embeddings = {0}/embeddings/text.emb1\n"
      "synth.preset = reference\nsynth.mode = text_only\nsynth.scale = 0.5\n"
      "models = rf_tfidf,neural_text\n"
      "rf.n_trees = 50\nrf.max_depth = none\nrf.min_samples_leaf = 1\nrf.max_features = sqrt\n"
      "train.epochs = 30\ntrain.lr = 0.003\ntrain.text_hidden = 32\nencode.text_dim = 32\n",
      data.string()));
  run_pipeline(dir / "run.cfg", data, false);
  const auto out = dir / "out";
  cli({"compare", "--config", (dir / "run.cfg").string(), "--out", out.string()});

  const auto rf = read_confusion(out / "reports" / "rf_tfidf_social_cognitive_confusion.csv");
  const auto nn = read_confusion(out / "reports" / "neural_text_social_cognitive_confusion.csv");
  check.expect(nn.classes.size() == 10, fmt::format("{} social classes survived the filter", nn.classes.size()));
  check.expect(nn.accuracy() >= kUnimodalNeuralAccuracy, fmt::format("neural_text accuracy {:.3f}", nn.accuracy()));
  check.expect(rf.accuracy() >= kUnimodalForestAccuracy, fmt::format("rf_tfidf accuracy {:.3f}", rf.accuracy()));

  // Top-3 majority classes by test support.
  std::vector<std::size_t> order(rf.classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rf.row_total(a) > rf.row_total(b); });
  double minority = 0, collapsed = 0;
  for (const char* code : {"SS4", "SS5"}) {
    const auto i = rf.index(code);
    minority += rf.row_total(i);
    for (std::size_t t = 0; t < 3; ++t) collapsed += rf.counts[i][order[t]];
  }
  const double share = minority > 0 ? collapsed / minority : 0.0;
  check.expect(share >= kUnimodalCollapseShare, fmt::format("rf collapse share {:.2f}", share));
  check.expect(nn.classes_with_true_positive() >= kUnimodalMinTruePositiveClasses,
               fmt::format("neural_text true positives in {} classes", nn.classes_with_true_positive()));
  return check.done(fmt::format(
      "neural_text acc {:.3f}, rf_tfidf acc {:.3f}, SS4/SS5 -> {}/{}/{} share {:.2f} ({:.0f}/{:.0f}), "
      "neural_text TP classes {}/{}",
      nn.accuracy(), rf.accuracy(), rf.classes[order[0]], rf.classes[order[1]], rf.classes[order[2]], share,
      collapsed, minority, nn.classes_with_true_positive(), nn.classes.size()));
}

Outcome multimodal_gain() {
  Check check;
  oracle::TempDir dir("acc_fusion");
  const auto data = dir / "data";
  oracle::write_text(dir / "run.cfg", fmt::format(
      "schema_version = 1\nseed = 11\n"
      "corpus = {0}/corpus.jsonl\naudio_dir = {0}/audio\nfeatures = {0}/features.csv\n"
      "text_embeddings = {0}/embeddings/text.emb1\naudio_embeddings = {0}/embeddings/audio.emb1\n"
      "synth.preset = custom\nsynth.mode = mixed\n"
      "synth.classes = SS1:150,SS2:150,SS3:150,SS4:150,SS5:150,SS6:150\nsynth.audio_only = SS4,SS5,SS6\n"
      "rf.n_trees = 50\nrf.max_depth = none\nrf.min_samples_leaf = 1\nrf.max_features = sqrt\n"
      "train.epochs = 30\ntrain.lr = 0.003\ntrain.text_hidden = 32\ntrain.audio_hidden = 16\n"
      "encode.text_dim = 32\nencode.audio_dim = 16\n",
      data.string()));
  run_pipeline(dir / "run.cfg", data, true);
  const auto out = dir / "out";
  cli({"compare", "--config", (dir / "run.cfg").string(), "--out", out.string()});
  auto acc = [&](const char* model) {
    return read_confusion(out / "reports" / fmt::format("{}_social_cognitive_confusion.csv", model)).accuracy();
  };
  const double text = acc("neural_text"), fusion = acc("neural_fusion");
  const double rf = acc("rf_tfidf"), rfa = acc("rf_tfidf_audio");
  check.expect(fusion - text >= kFusionMinGain, fmt::format("fusion gain {:+.3f}", fusion - text));
  return check.done(fmt::format(
      "neural_fusion {:.3f} vs neural_text {:.3f} (gain {:+.3f}); rf_tfidf_audio {:.3f} vs rf_tfidf {:.3f} ({:+.3f}, "
      "no required direction)",
      fusion, text, fusion - text, rfa, rf, rfa - rf));
}

audio::AudioClip tone(double f, double seconds, double amp, bool saw) {
  audio::AudioClip c;
  const auto n = static_cast<std::size_t>(std::llround(c.sample_rate * seconds));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / c.sample_rate;
    const double phase = f * t - std::floor(f * t);
    c.samples.push_back(saw ? amp * (2.0 * phase - 1.0) : amp * std::sin(2.0 * std::numbers::pi * f * t));
  }
  return c;
}

Outcome acoustic_fidelity() {
  Check check;
  const auto names = acoustic::default_feature_names();
  auto at = [&](const acoustic::AcousticFeatureVector& v, const std::string& name) {
    return v[static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin())];
  };
  acoustic::AcousticConfig cfg;

  double worst_rms = 0;
  for (double a : {0.05, 0.3, 0.9}) {
    const auto frames = acoustic::compute_llds(tone(250, 0.3, a, false), cfg);
    for (double v : frames.loudness) worst_rms = std::max(worst_rms, std::abs(v - a / std::sqrt(2.0)) / (a / std::sqrt(2.0)));
  }
  check.expect(worst_rms <= kRmsRelTolerance, fmt::format("sine RMS off by {:.3f}%", 100.0 * worst_rms));

  const double f0 = at(acoustic::extract_features(tone(200, 1.0, 0.5, true), cfg), "f0_mean");
  check.expect(std::abs(f0 - 200.0) <= kPitchToleranceHz, fmt::format("sawtooth f0 {:.2f}", f0));

  audio::AudioClip noise;
  Rng rng(3);
  for (int i = 0; i < 8000; ++i) noise.samples.push_back(0.2 * rng.normal());
  const double hnr_gap = at(acoustic::extract_features(tone(220, 0.5, 0.28, false), cfg), "hnr_mean") -
                         at(acoustic::extract_features(noise, cfg), "hnr_mean");
  check.expect(hnr_gap >= kHnrGapDb, fmt::format("HNR gap {:.1f} dB", hnr_gap));

  double worst_scale = 0;
  for (double gain : {0.25, 4.0}) {
    const auto base = tone(170, 0.5, 0.2, true);
    auto scaled = base;
    for (auto& s : scaled.samples) s *= gain;
    const auto a = acoustic::extract_features(base, cfg);
    const auto b = acoustic::extract_features(scaled, cfg);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const bool loud = names[i].rfind("loudness", 0) == 0;
      const double want = loud ? gain * a[i] : a[i];
      const double rel = std::abs(b[i] - want) / std::max(std::abs(want), 1e-12);
      const double err = std::abs(want) < 1e-9 ? std::abs(b[i] - want) : rel;
      worst_scale = std::max(worst_scale, err);
      check.expect(err <= kScaleRelTolerance, fmt::format("{} under gain {}: {} vs {}", names[i], gain, b[i], want));
    }
  }
  return check.done(fmt::format("RMS dev {:.3f}%, sawtooth f0 {:.2f} Hz, HNR gap {:.1f} dB, scaling dev {:.1e}",
                                100.0 * worst_rms, f0, hnr_gap, worst_scale));
}

// Small two-dimension, four-model run shared by the determinism and format checks.
struct SmallRun {
  std::unique_ptr<oracle::TempDir> dir;
  fs::path config;
};

SmallRun& small_run() {
  static SmallRun run = [] {
    SmallRun r;
    r.dir = std::make_unique<oracle::TempDir>("acc_small");
    const auto data = *r.dir / "data";
    r.config = *r.dir / "run.cfg";
    oracle::write_text(r.config, fmt::format(
        "schema_version = 1\nseed = 3\n"
        "corpus = {0}/corpus.jsonl\naudio_dir = {0}/audio\nfeatures = {0}/features.csv\n"
        "text_embeddings = {0}/embeddings/text.emb1\naudio_embeddings = {0}/embeddings/audio.emb1\n"
        "synth.preset = custom\nsynth.mode = mixed\nsynth.duration_s = 0.3\n"
        "synth.classes = SS1:30,SS2:30,SC1:30,AS1:30,AS2:30,AS3:30\nsynth.audio_only = SC1,AS3\n"
        "rf.n_trees = 10\nrf.max_depth = none\nrf.min_samples_leaf = 1\nrf.max_features = sqrt\n"
        "train.epochs = 6\ntrain.lr = 0.005\ntrain.text_hidden = 8\ntrain.audio_hidden = 4\n"
        "encode.text_dim = 8\nencode.audio_dim = 6\n",
        data.string()));
    run_pipeline(r.config, data, true);
    return r;
  }();
  return run;
}

Outcome determinism() {
  Check check;
  auto& run = small_run();
  const auto a = *run.dir / "det_a";
  const auto b = *run.dir / "det_b";
  cli({"compare", "--config", run.config.string(), "--out", a.string()});
  cli({"compare", "--config", run.config.string(), "--out", b.string()});
  const auto ta = oracle::snapshot_tree(a);
  const auto tb = oracle::snapshot_tree(b);
  std::size_t reports = 0, checkpoints = 0, svgs = 0;
  for (const auto& [path, bytes] : ta) {
    reports += path.rfind("reports", 0) == 0;
    checkpoints += path.rfind("checkpoints", 0) == 0;
    svgs += path.rfind("heatmaps", 0) == 0;
  }
  check.expect(ta.size() == tb.size(), fmt::format("{} vs {} files", ta.size(), tb.size()));
  for (std::size_t i = 0; i < std::min(ta.size(), tb.size()); ++i) {
    check.expect(ta[i].first == tb[i].first, "file lists differ at " + ta[i].first);
    check.expect(ta[i].second == tb[i].second, ta[i].first + " differs");
  }
  check.expect(checkpoints == 8 && svgs == 8, fmt::format("{} checkpoints, {} heatmaps", checkpoints, svgs));
  return check.done(fmt::format("{} files identical ({} reports, {} checkpoints, {} heatmaps)", ta.size(), reports,
                                checkpoints, svgs));
}

Outcome transfer_and_selection() {
  Check check;
  using fusenet::EpochRecord;
  const fusenet::ModelDims dims{5, 3, 4, 2};
  fusenet::TextClassifier donor({"A", "B", "C"}, dims, 1);
  fusenet::FusionClassifier fusion({"A", "B", "C"}, dims, 2);
  const auto head_before = fusion.head().weight.data;
  const auto audio_before = fusion.audio().lstm.forward.w_ih.data;
  fusenet::transfer_init(fusion, donor);
  auto fp = fusion.text().tensors();
  auto dp = donor.text().tensors();
  check.expect(fp.size() == dp.size(), "branch tensor counts differ");
  for (std::size_t k = 0; k < std::min(fp.size(), dp.size()); ++k) {
    check.expect(fp[k]->data == dp[k]->data && fp[k]->shape == dp[k]->shape, fmt::format("text tensor {} differs", k));
  }
  check.expect(fusion.head().weight.data == head_before, "head changed");
  check.expect(fusion.audio().lstm.forward.w_ih.data == audio_before, "audio branch changed");

  const std::vector<EpochRecord> argmax = {{1, 1.0, 0.9, 0.40}, {2, 0.8, 0.8, 0.62}, {3, 0.6, 0.7, 0.55}};
  const std::vector<EpochRecord> tie = {{1, 1.0, 0.9, 0.40}, {2, 0.8, 0.8, 0.62}, {3, 0.6, 0.5, 0.62},
                                        {4, 0.5, 0.5, 0.62}};
  const std::vector<EpochRecord> single = {{1, 2.0, 1.5, 0.10}};
  const auto s1 = fusenet::select_epoch(argmax), s2 = fusenet::select_epoch(tie), s3 = fusenet::select_epoch(single);
  check.expect(s1 == 2, fmt::format("argmax fixture gave epoch {}", s1));
  check.expect(s2 == 3, fmt::format("F1-tie fixture gave epoch {}", s2));
  check.expect(s3 == 1, fmt::format("singleton fixture gave epoch {}", s3));
  return check.done(fmt::format("{} text tensors equal; epochs {}/{}/{} (want 2/3/1)", fp.size(), s1, s2, s3));
}

Outcome output_formats() {
  Check check;
  auto& run = small_run();
  const auto out = *run.dir / "det_a";
  if (!fs::exists(out)) cli({"compare", "--config", run.config.string(), "--out", out.string()});
  const std::vector<std::string> models{"rf_tfidf", "rf_tfidf_audio", "neural_text", "neural_fusion"};
  const std::vector<std::string> dims{"social_cognitive", "affective"};

  const auto table = oracle::read_text(out / "reports" / "comparison.txt");
  for (const auto& d : dims) check.expect(table.find(d) != std::string::npos, "table lacks dimension " + d);
  for (const char* k : metrics::kMetricNames) check.expect(table.find(k) != std::string::npos, fmt::format("table lacks {}", k));
  const std::regex cell(R"((\*{0,2})(\.\d{3}|1\.000)\*{0,2})");
  std::vector<std::vector<std::string>> marks;
  for (const auto& m : models) {
    const auto pos = table.find("\n" + m + " ");
    check.expect(pos != std::string::npos, "table lacks row " + m);
    if (pos == std::string::npos) continue;
    const auto line = table.substr(pos + 1, table.find('\n', pos + 1) - pos - 1);
    std::vector<std::string> row;
    for (std::sregex_iterator it(line.begin(), line.end(), cell), end; it != end; ++it) row.push_back((*it)[1]);
    check.expect(row.size() == 4 * dims.size(), fmt::format("row {} has {} numbers", m, row.size()));
    marks.push_back(row);
  }
  if (marks.size() == models.size()) {
    for (std::size_t c = 0; c < 4 * dims.size(); ++c) {
      bool best = false;
      for (const auto& r : marks) best = best || (c < r.size() && r[c] == "**");
      check.expect(best, fmt::format("column {} has no best mark", c));
    }
  }

  const std::regex value(R"re(class="value"[^>]*>([0-9]+\.[0-9]{2})<)re");
  std::size_t svgs = 0, rows = 0;
  double worst = 0;
  for (const auto& m : models) {
    for (const auto& d : dims) {
      const auto path = out / "heatmaps" / (m + "_" + d + ".svg");
      if (!fs::exists(path)) {
        check.expect(false, "missing " + path.filename().string());
        continue;
      }
      ++svgs;
      const auto svg = oracle::read_text(path);
      std::vector<double> vals;
      for (std::sregex_iterator it(svg.begin(), svg.end(), value), end; it != end; ++it) vals.push_back(std::stod((*it)[1]));
      const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(vals.size()))));
      check.expect(k * k == vals.size() && k > 0, fmt::format("{} has {} cells", path.filename().string(), vals.size()));
      for (std::size_t r = 0; r < k && k * k == vals.size(); ++r) {
        double s = 0;
        for (std::size_t j = 0; j < k; ++j) s += vals[r * k + j];
        ++rows;
        worst = std::max(worst, std::abs(s - 1.0));
        check.expect(std::abs(s - 1.0) <= kRowSumTolerance, fmt::format("{} row {} sums to {:.2f}", path.filename().string(), r, s));
      }
    }
  }
  return check.done(fmt::format("{} models x {} dimensions, {} heatmaps, {} rows, max row-sum deviation {:.3f}",
                                models.size(), dims.size(), svgs, rows, worst));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient_integrity", gradient_integrity},
      {"metric_oracles", metric_oracles},
      {"wer_oracle", wer_oracle},
      {"kappa_oracle", kappa_oracle},
      {"split_arithmetic", split_arithmetic},
      {"unimodal_learnability", unimodal_learnability},
      {"multimodal_gain", multimodal_gain},
      {"acoustic_fidelity", acoustic_fidelity},
      {"compare_determinism", determinism},
      {"transfer_and_selection", transfer_and_selection},
      {"output_formats", output_formats},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("{} {} [{:.1f} s] {}\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail);
    std::fflush(stdout);
    failures += !o.pass;
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}

#include "cpsfuse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/parallel.hpp"
#include "cpsfuse/rng.hpp"
#include "cpsfuse/split.hpp"

namespace cpsfuse::classical {

std::size_t MaxFeatures::resolve(std::size_t n_features) const {
  std::size_t m = 1;
  switch (kind) {
    case Kind::Sqrt:
      m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
      break;
    case Kind::Count:
      m = static_cast<std::size_t>(value);
      break;
    case Kind::Fraction:
      m = static_cast<std::size_t>(value * static_cast<double>(n_features));
      break;
  }
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n_features, 1));
}

std::string MaxFeatures::to_string() const {
  switch (kind) {
    case Kind::Sqrt:
      return "sqrt";
    case Kind::Count:
      return fmt::format("{}", static_cast<std::size_t>(value));
    case Kind::Fraction:
      break;
  }
  return fmt::format("{}", value);
}

MaxFeatures MaxFeatures::parse(const std::string& text) {
  if (text == "sqrt") return sqrt();
  try {
    std::size_t used = 0;
    if (text.find('.') == std::string::npos) {
      const long long n = std::stoll(text, &used);
      if (used == text.size() && n >= 1) return count(static_cast<std::size_t>(n));
    } else {
      const double f = std::stod(text, &used);
      if (used == text.size() && f > 0.0 && f <= 1.0) return fraction(f);
    }
  } catch (const std::exception&) {
  }
  throw Error(fmt::format("invalid max_features '{}' (expected sqrt, a count, or a fraction)", text));
}

void RfConfig::validate() const {
  if (n_trees < 1) throw Error("n_trees must be >= 1");
  if (max_depth && *max_depth < 1) throw Error("max_depth must be >= 1 or unlimited");
  if (min_samples_leaf < 1) throw Error("min_samples_leaf must be >= 1");
  if (max_features.kind == MaxFeatures::Kind::Count && max_features.value < 1) {
    throw Error("max_features count must be >= 1");
  }
  if (max_features.kind == MaxFeatures::Kind::Fraction &&
      !(max_features.value > 0.0 && max_features.value <= 1.0)) {
    throw Error("max_features fraction must be in (0, 1]");
  }
}

std::string RfConfig::describe() const {
  return fmt::format("n_trees={} max_depth={} min_samples_leaf={} max_features={}", n_trees,
                     max_depth ? fmt::format("{}", *max_depth) : std::string("none"),
                     min_samples_leaf, max_features.to_string());
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature < 0) {
      best = std::max(best, d);
    } else {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

namespace {

double value_at(const SparseVector& x, std::uint32_t feature) {
  auto it = std::lower_bound(x.entries.begin(), x.entries.end(), feature,
                             [](const auto& e, std::uint32_t f) { return e.first < f; });
  return (it != x.entries.end() && it->first == feature) ? it->second : 0.0;
}

}  // namespace

const DecisionTree::Node& DecisionTree::leaf(const SparseVector& x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(value_at(x, static_cast<std::uint32_t>(n.feature)) <= n.threshold
                                     ? n.left
                                     : n.right);
  }
  return nodes[i];
}

RandomForestModel::RandomForestModel(std::vector<std::string> classes, std::size_t dimension,
                                     std::vector<DecisionTree> trees)
    : classes_(std::move(classes)), dimension_(dimension), trees_(std::move(trees)) {
  if (classes_.empty()) throw DataError("forest has no classes");
  if (!std::is_sorted(classes_.begin(), classes_.end()) ||
      std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    throw DataError("forest classes must be sorted and unique");
  }
  if (trees_.empty()) throw DataError("forest has no trees");
  for (const auto& t : trees_) {
    if (t.nodes.empty()) throw DataError("forest contains an empty tree");
    for (const auto& n : t.nodes) {
      if (n.feature < 0) {
        if (n.histogram.size() != classes_.size()) throw DataError("leaf histogram size mismatch");
      } else {
        const auto nn = static_cast<std::int32_t>(t.nodes.size());
        if (static_cast<std::size_t>(n.feature) >= dimension_ || n.left <= 0 || n.right <= 0 ||
            n.left >= nn || n.right >= nn) {
          throw DataError("malformed tree node");
        }
      }
    }
  }
}

Prediction RandomForestModel::predict(const SparseVector& x) const {
  if (x.dimension != dimension_) {
    throw DataError(fmt::format("feature dimension {} does not match model dimension {}",
                                x.dimension, dimension_));
  }
  std::vector<double> acc(classes_.size(), 0.0);
  for (const auto& tree : trees_) {
    const auto& h = tree.leaf(x).histogram;
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    if (total <= 0.0) continue;
    for (std::size_t k = 0; k < h.size(); ++k) acc[k] += h[k] / total;
  }
  const double s = std::accumulate(acc.begin(), acc.end(), 0.0);
  for (auto& a : acc) a /= s;
  const auto best = static_cast<std::size_t>(std::max_element(acc.begin(), acc.end()) - acc.begin());
  return {classes_[best], std::move(acc)};
}

std::vector<Prediction> RandomForestModel::predict(const std::vector<SparseVector>& xs) const {
  std::vector<Prediction> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out[i] = predict(xs[i]); });
  return out;
}

void RandomForestModel::save(binio::Container& out, const std::string& prefix) const {
  out.put_strings(prefix + ".classes", classes_);
  out.put_ints(prefix + ".shape", {static_cast<std::int64_t>(dimension_),
                                   static_cast<std::int64_t>(trees_.size())});
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const auto& nodes = trees_[t].nodes;
    std::vector<std::int64_t> feature, left, right;
    std::vector<double> threshold, leaves;
    for (const auto& n : nodes) {
      feature.push_back(n.feature);
      left.push_back(n.left);
      right.push_back(n.right);
      threshold.push_back(n.threshold);
      leaves.insert(leaves.end(), n.histogram.begin(), n.histogram.end());
    }
    const std::string p = fmt::format("{}.tree{}", prefix, t);
    out.put_ints(p + ".feature", std::move(feature));
    out.put_ints(p + ".left", std::move(left));
    out.put_ints(p + ".right", std::move(right));
    out.put_tensor(p + ".threshold", {threshold.size()}, threshold);
    out.put_tensor(p + ".leaves", {leaves.size()}, leaves);
  }
}

RandomForestModel RandomForestModel::load(const binio::Container& in, const std::string& prefix) {
  auto classes = in.strings(prefix + ".classes");
  const auto& shape = in.ints(prefix + ".shape");
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 1) throw DataError("bad forest shape");
  std::vector<DecisionTree> trees(static_cast<std::size_t>(shape[1]));
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string p = fmt::format("{}.tree{}", prefix, t);
    const auto& feature = in.ints(p + ".feature");
    const auto& left = in.ints(p + ".left");
    const auto& right = in.ints(p + ".right");
    const auto& threshold = in.tensor(p + ".threshold").data;
    const auto& leaves = in.tensor(p + ".leaves").data;
    const std::size_t n = feature.size();
    if (left.size() != n || right.size() != n || threshold.size() != n) {
      throw DataError(fmt::format("tree {} arrays disagree in length", t));
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
      DecisionTree::Node node;
      node.feature = static_cast<std::int32_t>(feature[i]);
      node.left = static_cast<std::int32_t>(left[i]);
      node.right = static_cast<std::int32_t>(right[i]);
      node.threshold = threshold[i];
      if (node.feature < 0) {
        if (cursor + classes.size() > leaves.size()) throw DataError("truncated leaf data");
        node.histogram.assign(leaves.begin() + static_cast<std::ptrdiff_t>(cursor),
                              leaves.begin() + static_cast<std::ptrdiff_t>(cursor + classes.size()));
        cursor += classes.size();
      }
      trees[t].nodes.push_back(std::move(node));
    }
    if (cursor != leaves.size()) throw DataError("excess leaf data");
  }
  return RandomForestModel(std::move(classes), static_cast<std::size_t>(shape[0]), std::move(trees));
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<SparseVector>& X, const std::vector<std::uint32_t>& y,
              std::size_t n_classes, std::size_t dimension, const RfConfig& config)
      : X_(X), y_(y), k_(n_classes), dim_(dimension), config_(config), buckets_(dimension),
        goes_left_(X.size(), 0), nonzero_tmp_(X.size(), 0) {}

  DecisionTree build(std::uint64_t seed) {
    Rng rng(seed);
    weight_.assign(X_.size(), 0.0);
    if (config_.bootstrap) {
      for (std::size_t i = 0; i < X_.size(); ++i) weight_[rng.below(X_.size())] += 1.0;
    } else {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    }
    samples_.clear();
    for (std::uint32_t i = 0; i < X_.size(); ++i) {
      if (weight_[i] > 0.0) samples_.push_back(i);
    }

    DecisionTree tree;
    tree.nodes.emplace_back();
    struct Task {
      std::size_t begin, end, depth;
      std::int32_t node;
    };
    std::vector<Task> stack{{0, samples_.size(), 0, 0}};
    std::vector<double> counts(k_);
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      std::fill(counts.begin(), counts.end(), 0.0);
      double total = 0.0;
      for (std::size_t i = task.begin; i < task.end; ++i) {
        counts[y_[samples_[i]]] += weight_[samples_[i]];
        total += weight_[samples_[i]];
      }
      const auto nonzero_classes =
          std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
      const bool stop = (config_.max_depth && task.depth >= *config_.max_depth) ||
                        nonzero_classes <= 1 ||
                        total < 2.0 * static_cast<double>(config_.min_samples_leaf);
      std::optional<Split> split;
      if (!stop) split = find_split(task.begin, task.end, counts, total, rng);
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      if (!split) {
        node.histogram = counts;
        continue;
      }
      const std::size_t mid = partition(task.begin, task.end, *split);
      node.feature = static_cast<std::int32_t>(split->feature);
      node.threshold = split->threshold;
      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      node.left = left;
      node.right = left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stack.push_back({mid, task.end, task.depth + 1, left + 1});
      stack.push_back({task.begin, mid, task.depth + 1, left});
    }
    return tree;
  }

 private:
  struct Split {
    std::uint32_t feature;
    double threshold;
    double score;
  };
  using Entry = std::pair<double, std::uint32_t>;  // value, sample

  std::optional<Split> find_split(std::size_t begin, std::size_t end,
                                  const std::vector<double>& counts, double total, Rng& rng) {
    touched_.clear();
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t s = samples_[i];
      for (const auto& [f, v] : X_[s].entries) {
        if (buckets_[f].empty()) touched_.push_back(f);
        buckets_[f].emplace_back(v, s);
      }
    }
    std::sort(touched_.begin(), touched_.end());
    const std::size_t n_node = end - begin;
    std::vector<std::uint32_t> candidates;
    for (auto f : touched_) {
      const auto& b = buckets_[f];
      bool varies = b.size() < n_node;
      for (std::size_t i = 1; !varies && i < b.size(); ++i) varies = b[i].first != b[0].first;
      if (varies) candidates.push_back(f);
    }

    std::optional<Split> best;
    std::size_t m = std::min(config_.max_features.resolve(dim_), candidates.size());
    for (std::size_t j = 0; j < m; ++j) {
      std::swap(candidates[j], candidates[j + rng.below(candidates.size() - j)]);
      auto s = evaluate(candidates[j], counts, total);
      if (s && (!best || s->score > best->score)) best = s;
    }
    if (best) {
      for (const auto& [v, s] : buckets_[best->feature]) goes_left_[s] = v <= best->threshold;
    }
    chosen_zero_left_ = best && 0.0 <= best->threshold;
    for (auto f : touched_) {
      if (!best || f != best->feature) buckets_[f].clear();
    }
    return best;
  }

  std::optional<Split> evaluate(std::uint32_t feature, const std::vector<double>& counts,
                                double total) {
    auto& b = buckets_[feature];
    std::sort(b.begin(), b.end());
    std::vector<double> zero = counts;
    double zero_w = total;
    for (const auto& [v, s] : b) {
      zero[y_[s]] -= weight_[s];
      zero_w -= weight_[s];
    }
    const double min_leaf = static_cast<double>(config_.min_samples_leaf);
    std::vector<double> left(k_, 0.0);
    double left_w = 0.0;
    std::optional<Split> best;

    auto sumsq = [](const std::vector<double>& c) {
      double s = 0.0;
      for (double x : c) s += x * x;
      return s;
    };
    // Boundary after all values <= a, before the next distinct value c.
    auto consider = [&](double a, double c) {
      const double right_w = total - left_w;
      if (left_w < min_leaf || right_w < min_leaf) return;
      double right_sq = 0.0;
      for (std::size_t k = 0; k < k_; ++k) {
        const double r = counts[k] - left[k];
        right_sq += r * r;
      }
      const double score = sumsq(left) / left_w + right_sq / right_w;
      if (!best || score > best->score) {
        double t = a + (c - a) / 2.0;
        if (!(t < c)) t = a;
        best = Split{feature, t, score};
      }
    };

    std::size_t i = 0;
    bool zero_done = zero_w <= 0.0;
    double prev = 0.0;
    bool have_prev = false;
    auto add_zero = [&]() {
      if (have_prev) consider(prev, 0.0);
      for (std::size_t k = 0; k < k_; ++k) left[k] += zero[k];
      left_w += zero_w;
      prev = 0.0;
      have_prev = true;
      zero_done = true;
    };
    while (i < b.size()) {
      const double v = b[i].first;
      if (!zero_done && v > 0.0) {
        add_zero();
        continue;
      }
      if (have_prev) consider(prev, v);
      while (i < b.size() && b[i].first == v) {
        left[y_[b[i].second]] += weight_[b[i].second];
        left_w += weight_[b[i].second];
        ++i;
      }
      prev = v;
      have_prev = true;
    }
    if (!zero_done) add_zero();
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
    auto& b = buckets_[split.feature];
    // goes_left_ already holds the decision for nonzero entries; everything
    // else sits at zero.
    for (std::size_t i = begin; i < end; ++i) nonzero_tmp_[samples_[i]] = 0;
    for (const auto& [_, s] : b) nonzero_tmp_[s] = 1;
    auto mid = std::stable_partition(
        samples_.begin() + static_cast<std::ptrdiff_t>(begin),
        samples_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::uint32_t s) {
          return nonzero_tmp_[s] ? goes_left_[s] != 0 : chosen_zero_left_;
        });
    b.clear();
    return static_cast<std::size_t>(mid - samples_.begin());
  }

 private:
  const std::vector<SparseVector>& X_;
  const std::vector<std::uint32_t>& y_;
  std::size_t k_;
  std::size_t dim_;
  const RfConfig& config_;
  std::vector<std::vector<Entry>> buckets_;
  std::vector<std::uint32_t> touched_;
  std::vector<char> goes_left_;
  std::vector<char> nonzero_tmp_;
  bool chosen_zero_left_ = false;
  std::vector<double> weight_;
  std::vector<std::uint32_t> samples_;
};

}  // namespace

RandomForestModel train_random_forest(const std::vector<SparseVector>& X,
                                      const std::vector<std::string>& y,
                                      const RfConfig& config) {
  config.validate();
  if (X.size() != y.size()) {
    throw Error(fmt::format("{} feature rows but {} labels", X.size(), y.size()));
  }
  if (X.size() < 2) throw DataError("a random forest needs at least 2 training rows");
  const std::size_t dim = X.front().dimension;
  for (const auto& x : X) {
    if (x.dimension != dim) {
      throw DataError(fmt::format("feature dimension mismatch: {} vs {}", x.dimension, dim));
    }
    for (std::size_t i = 0; i < x.entries.size(); ++i) {
      if (x.entries[i].first >= dim || (i > 0 && x.entries[i].first <= x.entries[i - 1].first) ||
          !std::isfinite(x.entries[i].second)) {
        throw DataError("sparse row has unsorted, out-of-range, or non-finite entries");
      }
    }
  }
  std::vector<std::string> classes = y;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<std::uint32_t> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yi[i] = static_cast<std::uint32_t>(std::lower_bound(classes.begin(), classes.end(), y[i]) -
                                       classes.begin());
  }

  std::vector<DecisionTree> trees(config.n_trees);
  parallel_for(config.n_trees, [&](std::size_t t) {
    TreeBuilder builder(X, yi, classes.size(), dim, config);
    trees[t] = builder.build(derive_seed(config.seed, t));
  });
  return RandomForestModel(std::move(classes), dim, std::move(trees));
}

std::vector<RfConfig> GridSpec::candidates(const RfConfig& base) const {
  std::vector<RfConfig> out;
  for (auto n : n_trees) {
    for (const auto& d : max_depth) {
      for (auto leaf : min_samples_leaf) {
        for (const auto& mf : max_features) {
          RfConfig c = base;
          c.n_trees = n;
          c.max_depth = d;
          c.min_samples_leaf = leaf;
          c.max_features = mf;
          c.validate();
          out.push_back(c);
        }
      }
    }
  }
  if (out.empty()) throw Error("grid has no candidates");
  return out;
}

GridSearchResult grid_search_cv(const std::vector<SparseVector>& X,
                                const std::vector<std::string>& y, const GridSpec& grid,
                                const RfConfig& base, std::uint64_t seed) {
  if (grid.folds < 2) throw Error("grid search needs at least 2 folds");
  if (X.size() != y.size()) {
    throw Error(fmt::format("{} feature rows but {} labels", X.size(), y.size()));
  }
  const auto configs = grid.candidates(base);
  const auto fold_of = corpus::stratified_folds(y, grid.folds, seed);

  CvReport report;
  for (const auto& config : configs) {
    CvReport::Entry entry{config, {}, 0.0};
    for (std::size_t k = 0; k < grid.folds; ++k) {
      std::vector<SparseVector> fit_x, val_x;
      std::vector<std::string> fit_y, val_y;
      for (std::size_t i = 0; i < X.size(); ++i) {
        if (fold_of[i] == k) {
          val_x.push_back(X[i]);
          val_y.push_back(y[i]);
        } else {
          fit_x.push_back(X[i]);
          fit_y.push_back(y[i]);
        }
      }
      const auto model = train_random_forest(fit_x, fit_y, config);
      const auto preds = model.predict(val_x);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == val_y[i];
      entry.fold_accuracy.push_back(static_cast<double>(correct) /
                                    static_cast<double>(val_y.size()));
    }
    entry.mean_accuracy = std::accumulate(entry.fold_accuracy.begin(), entry.fold_accuracy.end(), 0.0) /
                          static_cast<double>(grid.folds);
    report.entries.push_back(std::move(entry));
  }
  for (std::size_t i = 1; i < report.entries.size(); ++i) {
    if (report.entries[i].mean_accuracy > report.entries[report.best].mean_accuracy) report.best = i;
  }
  const RfConfig best = report.entries[report.best].config;
  auto model = train_random_forest(X, y, best);
  return {best, std::move(report), std::move(model)};
}

}  // namespace cpsfuse::classical

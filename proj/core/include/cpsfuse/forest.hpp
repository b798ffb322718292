#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpsfuse/binio.hpp"
#include "cpsfuse/tfidf.hpp"

namespace cpsfuse::classical {

/// Candidate features per split: sqrt(F), a fixed count, or a fraction of F.
struct MaxFeatures {
  enum class Kind { Sqrt, Count, Fraction };
  Kind kind = Kind::Sqrt;
  double value = 0.0;

  static MaxFeatures sqrt() { return {}; }
  static MaxFeatures count(std::size_t n) { return {Kind::Count, static_cast<double>(n)}; }
  static MaxFeatures fraction(double f) { return {Kind::Fraction, f}; }

  /// Resolved count for F features, in [1, F].
  std::size_t resolve(std::size_t n_features) const;
  std::string to_string() const;
  /// "sqrt", an integer count, or a fraction in (0, 1].
  static MaxFeatures parse(const std::string& text);

  bool operator==(const MaxFeatures&) const = default;
};

struct RfConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_leaf = 1;
  MaxFeatures max_features;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;

  bool operator==(const RfConfig&) const = default;
};

/// Flat CART tree. Internal nodes have feature >= 0 and send x <= threshold
/// left; leaves have feature == -1 and a weighted class histogram.
struct DecisionTree {
  struct Node {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::vector<double> histogram;  // leaves only, length = class count
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  std::size_t depth() const;
  const Node& leaf(const SparseVector& x) const;
};

struct Prediction {
  std::string label;
  std::vector<double> fractions;  // class order of the model
};

class RandomForestModel {
 public:
  RandomForestModel() = default;
  /// classes must be sorted and unique; every leaf histogram must have
  /// classes.size() entries.
  RandomForestModel(std::vector<std::string> classes, std::size_t dimension,
                    std::vector<DecisionTree> trees);

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Mean of normalized leaf histograms; ties go to the smallest class code.
  Prediction predict(const SparseVector& x) const;
  std::vector<Prediction> predict(const std::vector<SparseVector>& xs) const;

  void save(binio::Container& out, const std::string& prefix) const;
  static RandomForestModel load(const binio::Container& in, const std::string& prefix);

 private:
  std::vector<std::string> classes_;
  std::size_t dimension_ = 0;
  std::vector<DecisionTree> trees_;
};

/// Bootstrap-sampled Gini CART trees, built in parallel with per-tree seeds
/// derive_seed(config.seed, tree index).
RandomForestModel train_random_forest(const std::vector<SparseVector>& X,
                                      const std::vector<std::string>& y,
                                      const RfConfig& config);

inline std::vector<Prediction> predict_classical(const RandomForestModel& model,
                                                 const std::vector<SparseVector>& X) {
  return model.predict(X);
}

struct GridSpec {
  std::vector<std::size_t> n_trees{100, 300};
  std::vector<std::optional<std::size_t>> max_depth{8, 16, std::nullopt};
  std::vector<std::size_t> min_samples_leaf{1, 3};
  std::vector<MaxFeatures> max_features{MaxFeatures::sqrt(), MaxFeatures::fraction(0.3)};
  std::size_t folds = 3;

  /// Cartesian product; the last hyperparameter varies fastest. bootstrap and
  /// seed come from base.
  std::vector<RfConfig> candidates(const RfConfig& base) const;
};

struct CvReport {
  struct Entry {
    RfConfig config;
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
  };
  std::vector<Entry> entries;  // grid order
  std::size_t best = 0;
};

struct GridSearchResult {
  RfConfig best;
  CvReport report;
  RandomForestModel model;  // best config refit on all of X
};

/// Stratified k-fold search by mean validation accuracy; ties keep the
/// earliest candidate. Throws DataError when a class has fewer members than
/// folds.
GridSearchResult grid_search_cv(const std::vector<SparseVector>& X,
                                const std::vector<std::string>& y, const GridSpec& grid,
                                const RfConfig& base, std::uint64_t seed);

}  // namespace cpsfuse::classical

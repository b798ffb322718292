#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpsfuse/corpus.hpp"

namespace cpsfuse::corpus {

struct SplitSpec {
  double test_fraction = 0.2;
  double val_fraction = 0.2;
  std::size_t min_class_instances = 10;
  std::size_t cv_folds = 3;
  std::uint64_t seed = 0;

  /// Throws Error when an invariant is violated.
  void validate() const;
};

struct DatasetSplit {
  std::vector<std::string> train;  // instance ids, input order
  std::vector<std::string> test;
};

/// Held-out count for a class of n members: round-half-to-even(n * fraction)
/// clamped to [1, n - 1]. Requires n >= 2.
std::size_t held_out_count(std::size_t n, double fraction);

struct IndexSplit {
  std::vector<std::size_t> kept;      // ascending
  std::vector<std::size_t> held_out;  // ascending
};

/// Per-class seeded selection of held-out indices over a label vector.
/// With allow_singletons, classes of one member go entirely to `kept`;
/// otherwise they raise DataError.
IndexSplit stratified_indices(const std::vector<std::string>& labels, double fraction,
                              std::uint64_t seed, bool allow_singletons = false);

/// Fold id per position; per class, fold sizes differ by at most one.
/// Throws DataError when a class has fewer members than folds.
std::vector<std::size_t> stratified_folds(const std::vector<std::string>& labels,
                                          std::size_t folds, std::uint64_t seed);

DatasetSplit stratified_split(const std::vector<CodedInstance>& instances,
                              const SplitSpec& spec);

/// Instances selected by id list, in list order.
std::vector<CodedInstance> select(const std::vector<CodedInstance>& instances,
                                  const std::vector<std::string>& ids);

}  // namespace cpsfuse::corpus

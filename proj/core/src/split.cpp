#include "cpsfuse/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/rng.hpp"

namespace cpsfuse::corpus {

void SplitSpec::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(fmt::format("test_fraction must be in (0,1), got {}", test_fraction));
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error(fmt::format("val_fraction must be in (0,1), got {}", val_fraction));
  }
  if (min_class_instances < 1) throw Error("min_class_instances must be >= 1");
  if (cv_folds < 2) throw Error("cv_folds must be >= 2");
}

std::size_t held_out_count(std::size_t n, double fraction) {
  if (n < 2) throw DataError(fmt::format("cannot split a class of {} instance(s)", n));
  // nearbyint under the default rounding mode is round-half-to-even.
  const double raw = std::nearbyint(static_cast<double>(n) * fraction);
  const auto k = static_cast<std::size_t>(std::max(raw, 0.0));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

namespace {

// Class members grouped by label, classes in sorted label order.
std::map<std::string, std::vector<std::size_t>> group(const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

}  // namespace

IndexSplit stratified_indices(const std::vector<std::string>& labels, double fraction,
                              std::uint64_t seed, bool allow_singletons) {
  std::vector<bool> held(labels.size(), false);
  for (auto& [label, members] : group(labels)) {
    const std::uint64_t class_seed = derive_seed(seed, fnv1a64(label));
    if (members.size() < 2) {
      if (allow_singletons) continue;
      throw DataError(fmt::format("class '{}' has {} instance(s); at least 2 are needed "
                                  "for a stratified split",
                                  label, members.size()));
    }
    const std::size_t k = held_out_count(members.size(), fraction);
    Rng rng(class_seed);
    rng.shuffle(members);
    for (std::size_t j = 0; j < k; ++j) held[members[j]] = true;
  }
  IndexSplit out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (held[i] ? out.held_out : out.kept).push_back(i);
  }
  return out;
}

std::vector<std::size_t> stratified_folds(const std::vector<std::string>& labels,
                                          std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error("fold count must be >= 2");
  std::vector<std::size_t> fold_of(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [label, members] : group(labels)) {
    if (members.size() < folds) {
      throw DataError(fmt::format("class '{}' has {} instance(s), fewer than {} folds",
                                  label, members.size(), folds));
    }
    Rng rng(derive_seed(seed, fnv1a64(label)));
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) {
      fold_of[members[j]] = (j + offset) % folds;
    }
    offset = (offset + members.size()) % folds;
  }
  return fold_of;
}

DatasetSplit stratified_split(const std::vector<CodedInstance>& instances,
                              const SplitSpec& spec) {
  spec.validate();
  const auto idx = stratified_indices(labels_of(instances), spec.test_fraction, spec.seed);
  DatasetSplit s;
  for (auto i : idx.kept) s.train.push_back(instances[i].id);
  for (auto i : idx.held_out) s.test.push_back(instances[i].id);
  return s;
}

std::vector<CodedInstance> select(const std::vector<CodedInstance>& instances,
                                  const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < instances.size(); ++i) pos.emplace(instances[i].id, i);
  std::vector<CodedInstance> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = pos.find(id);
    if (it == pos.end()) throw DataError(fmt::format("unknown instance id '{}'", id));
    out.push_back(instances[it->second]);
  }
  return out;
}

}  // namespace cpsfuse::corpus

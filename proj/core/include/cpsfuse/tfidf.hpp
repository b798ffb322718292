#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/binio.hpp"

namespace cpsfuse::classical {

using StopwordSet = std::unordered_set<std::string>;

/// The shipped English list (stopwords_en_v1.txt).
const StopwordSet& english_stopwords();
inline constexpr std::string_view kStopwordsVersion = "en_v1";

/// Parses one word per line; blank lines and '#' comments are skipped.
StopwordSet parse_stopwords(std::string_view text);

/// Lowercased runs of [A-Za-z0-9_] (bytes >= 0x80 count as word bytes) of
/// length >= 2.
std::vector<std::string> tokenize(std::string_view text);

struct SparseVector {
  std::size_t dimension = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;  // strictly increasing index

  double norm() const;
};

class TfidfModel {
 public:
  TfidfModel() = default;
  TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf);

  std::size_t size() const { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<double>& idf() const { return idf_; }
  /// Column of term, or -1.
  std::int64_t index_of(std::string_view term) const;

  /// Raw counts times idf, L2-normalized. Unknown terms are ignored.
  SparseVector transform(std::string_view text) const;

  void save(binio::Container& out, const std::string& prefix) const;
  static TfidfModel load(const binio::Container& in, const std::string& prefix);

 private:
  std::vector<std::string> vocabulary_;  // sorted
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Vocabulary is every non-stopword term, sorted; idf = ln((1+N)/(1+df)) + 1.
/// Throws DataError when no document has a usable term.
TfidfModel fit_tfidf(const std::vector<std::string>& texts, const StopwordSet& stopwords);

inline SparseVector transform_tfidf(const TfidfModel& model, std::string_view text) {
  return model.transform(text);
}

/// Per-feature z-scoring with statistics from the training split.
class AudioScaler {
 public:
  AudioScaler() = default;
  AudioScaler(std::vector<double> mean, std::vector<double> std);

  static AudioScaler fit(const std::vector<acoustic::AcousticFeatureVector>& rows);

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

  /// Features with zero std map to 0.
  std::vector<double> transform(std::span<const double> values) const;

  void save(binio::Container& out, const std::string& prefix) const;
  static AudioScaler load(const binio::Container& in, const std::string& prefix);

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

/// Text block followed by the scaled audio block; dimension |V| + 11.
SparseVector concat_features(const SparseVector& text, std::span<const double> audio,
                             const AudioScaler& scaler);

}  // namespace cpsfuse::classical

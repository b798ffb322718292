#include "cpsfuse/tfidf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::classical {

namespace detail {
extern const std::string_view kStopwordsV1Text;
}

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c == '_' || c >= 0x80;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (!line.empty() && line.front() != '#') {
      std::string word(line);
      std::transform(word.begin(), word.end(), word.begin(), lower);
      out.insert(std::move(word));
    }
    pos = end + 1;
  }
  return out;
}

const StopwordSet& english_stopwords() {
  static const StopwordSet words = parse_stopwords(detail::kStopwordsV1Text);
  return words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i >= 2) {
      std::string token(text.substr(i, j - i));
      std::transform(token.begin(), token.end(), token.begin(), lower);
      out.push_back(std::move(token));
    }
    i = j;
  }
  return out;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [_, v] : entries) s += v * v;
  return std::sqrt(s);
}

TfidfModel::TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf)
    : vocabulary_(std::move(vocabulary)), idf_(std::move(idf)) {
  if (vocabulary_.size() != idf_.size()) throw DataError("vocabulary and idf sizes differ");
  if (!std::is_sorted(vocabulary_.begin(), vocabulary_.end()) ||
      std::adjacent_find(vocabulary_.begin(), vocabulary_.end()) != vocabulary_.end()) {
    throw DataError("vocabulary must be sorted and unique");
  }
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    index_.emplace(vocabulary_[i], static_cast<std::uint32_t>(i));
  }
}

std::int64_t TfidfModel::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

SparseVector TfidfModel::transform(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& tok : tokenize(text)) {
    auto it = index_.find(tok);
    if (it != index_.end()) counts[it->second] += 1.0;
  }
  SparseVector out{size(), {}};
  out.entries.reserve(counts.size());
  for (const auto& [idx, c] : counts) out.entries.emplace_back(idx, c * idf_[idx]);
  const double n = out.norm();
  if (n > 0.0) {
    for (auto& e : out.entries) e.second /= n;
  }
  return out;
}

void TfidfModel::save(binio::Container& out, const std::string& prefix) const {
  out.put_strings(prefix + ".vocabulary", vocabulary_);
  out.put_tensor(prefix + ".idf", {idf_.size()}, idf_);
}

TfidfModel TfidfModel::load(const binio::Container& in, const std::string& prefix) {
  return TfidfModel(in.strings(prefix + ".vocabulary"), in.tensor(prefix + ".idf").data);
}

TfidfModel fit_tfidf(const std::vector<std::string>& texts, const StopwordSet& stopwords) {
  if (texts.empty()) throw DataError("cannot fit TF-IDF on zero documents");
  std::map<std::string, std::size_t> df;
  for (const auto& text : texts) {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) {
      if (!stopwords.contains(t)) ++df[std::move(t)];
    }
  }
  if (df.empty()) throw DataError("all documents are empty after stopword removal");
  const double n = static_cast<double>(texts.size());
  std::vector<std::string> vocab;
  std::vector<double> idf;
  for (const auto& [term, count] : df) {
    vocab.push_back(term);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return TfidfModel(std::move(vocab), std::move(idf));
}

AudioScaler::AudioScaler(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw DataError("scaler mean and std sizes differ");
}

AudioScaler AudioScaler::fit(const std::vector<acoustic::AcousticFeatureVector>& rows) {
  if (rows.empty()) throw DataError("cannot fit the audio scaler on zero rows");
  const std::size_t k = acoustic::kFeatureCount;
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < k; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < k; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  }
  for (auto& s : sd) s = std::sqrt(s / static_cast<double>(rows.size()));
  return AudioScaler(std::move(mean), std::move(sd));
}

std::vector<double> AudioScaler::transform(std::span<const double> values) const {
  if (values.size() != mean_.size()) {
    throw DataError(fmt::format("audio vector has {} values, scaler expects {}", values.size(),
                                mean_.size()));
  }
  std::vector<double> out(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    out[j] = std_[j] > 0.0 ? (values[j] - mean_[j]) / std_[j] : 0.0;
  }
  return out;
}

void AudioScaler::save(binio::Container& out, const std::string& prefix) const {
  out.put_tensor(prefix + ".mean", {mean_.size()}, mean_);
  out.put_tensor(prefix + ".std", {std_.size()}, std_);
}

AudioScaler AudioScaler::load(const binio::Container& in, const std::string& prefix) {
  return AudioScaler(in.tensor(prefix + ".mean").data, in.tensor(prefix + ".std").data);
}

SparseVector concat_features(const SparseVector& text, std::span<const double> audio,
                             const AudioScaler& scaler) {
  if (audio.size() != acoustic::kFeatureCount) {
    throw DataError(fmt::format("audio vector has {} values, expected {}", audio.size(),
                                acoustic::kFeatureCount));
  }
  const auto scaled = scaler.transform(audio);
  SparseVector out{text.dimension + scaled.size(), text.entries};
  for (std::size_t j = 0; j < scaled.size(); ++j) {
    if (scaled[j] != 0.0) {
      out.entries.emplace_back(static_cast<std::uint32_t>(text.dimension + j), scaled[j]);
    }
  }
  return out;
}

}  // namespace cpsfuse::classical

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cpsfuse::corpus {

/// Lowercased whitespace tokens.
std::vector<std::string> wer_tokens(std::string_view text);

/// Unit-cost Levenshtein distance over word sequences.
std::size_t word_edit_distance(const std::vector<std::string>& reference,
                               const std::vector<std::string>& hypothesis);

/// Edit distance / reference word count. Throws Error on an empty reference.
double word_error_rate(std::string_view reference, std::string_view hypothesis);

struct RaterPair {
  std::string id;
  std::string rater_a;
  std::string rater_b;
};

/// Cohen's kappa. Defined as 1.0 when chance agreement is 1.
double cohens_kappa(const std::vector<RaterPair>& pairs);

/// CSV with header id,rater_a,rater_b.
std::vector<RaterPair> load_rater_file(const std::filesystem::path& path);

}  // namespace cpsfuse::corpus

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cpsfuse/corpus.hpp"

namespace cpsfuse::corpus {

/// Category name -> surface strings. Matches render as "[CATEGORY]".
class MaskLexicon {
 public:
  MaskLexicon() = default;

  /// NAME, TEACHER, SCHOOL, LOCATION, WEBSITE, URL, APP, GAME, MOVIE, SONG,
  /// DEVICE with no surface strings; fill them from a lexicon file.
  static MaskLexicon default_categories();

  /// Throws Error on a duplicate category, an invalid category name
  /// (must be [A-Z0-9_]+), or an empty / bracket-containing surface string.
  void add_category(std::string category, std::vector<std::string> surfaces);

  const std::vector<std::pair<std::string, std::vector<std::string>>>& categories() const {
    return categories_;
  }
  bool empty() const;

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> categories_;
};

MaskLexicon load_mask_lexicon(const std::filesystem::path& path);
/// JSON object: utterance id -> replacement text (hand corrections).
std::map<std::string, std::string> load_mask_overrides(const std::filesystem::path& path);

/// Case-insensitive, word-bounded, longest-match-first replacement.
/// Existing "[CATEGORY]" tokens are never rewritten, so masking is idempotent.
std::string mask_text(std::string_view text, const MaskLexicon& lexicon);

/// Applies overrides (replacing the whole text) and then the lexicon.
Corpus apply_masks(const Corpus& corpus, const MaskLexicon& lexicon,
                   const std::map<std::string, std::string>& overrides = {});

}  // namespace cpsfuse::corpus

#include "cpsfuse/masking.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "json.hpp"

namespace cpsfuse::corpus {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool valid_category(std::string_view name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isupper(c) || std::isdigit(c) || c == '_';
  });
}

// Length of a "[CATEGORY]" token starting at pos, or 0.
std::size_t mask_token_length(std::string_view text, std::size_t pos) {
  if (text[pos] != '[') return 0;
  std::size_t end = pos + 1;
  while (end < text.size() && (std::isupper(static_cast<unsigned char>(text[end])) ||
                               std::isdigit(static_cast<unsigned char>(text[end])) ||
                               text[end] == '_')) {
    ++end;
  }
  if (end == pos + 1 || end >= text.size() || text[end] != ']') return 0;
  return end - pos + 1;
}

struct Pattern {
  std::string surface;  // lowercased
  std::string replacement;
};

std::vector<Pattern> compile(const MaskLexicon& lexicon) {
  std::vector<Pattern> patterns;
  std::set<std::string> seen;
  for (const auto& [category, surfaces] : lexicon.categories()) {
    for (const auto& s : surfaces) {
      std::string low(s.size(), '\0');
      std::transform(s.begin(), s.end(), low.begin(), lower);
      // The first category listing a surface owns it.
      if (seen.insert(low).second) patterns.push_back({low, "[" + category + "]"});
    }
  }
  std::stable_sort(patterns.begin(), patterns.end(), [](const Pattern& a, const Pattern& b) {
    return a.surface.size() > b.surface.size();
  });
  return patterns;
}

bool matches_at(std::string_view text, std::size_t pos, const std::string& surface) {
  if (pos + surface.size() > text.size()) return false;
  for (std::size_t k = 0; k < surface.size(); ++k) {
    if (lower(text[pos + k]) != surface[k]) return false;
  }
  const auto first = static_cast<unsigned char>(surface.front());
  const auto last = static_cast<unsigned char>(surface.back());
  if (is_word_byte(first) && pos > 0 &&
      is_word_byte(static_cast<unsigned char>(text[pos - 1]))) {
    return false;
  }
  const std::size_t end = pos + surface.size();
  if (is_word_byte(last) && end < text.size() &&
      is_word_byte(static_cast<unsigned char>(text[end]))) {
    return false;
  }
  return true;
}

std::string mask_with(std::string_view text, const std::vector<Pattern>& patterns) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (const std::size_t t = mask_token_length(text, i); t > 0) {
      out.append(text.substr(i, t));
      i += t;
      continue;
    }
    bool replaced = false;
    for (const auto& p : patterns) {
      if (matches_at(text, i, p.surface)) {
        out += p.replacement;
        i += p.surface.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

}  // namespace

MaskLexicon MaskLexicon::default_categories() {
  MaskLexicon lex;
  for (const char* c : {"NAME", "TEACHER", "SCHOOL", "LOCATION", "WEBSITE", "URL", "APP",
                        "GAME", "MOVIE", "SONG", "DEVICE"}) {
    lex.add_category(c, {});
  }
  return lex;
}

void MaskLexicon::add_category(std::string category, std::vector<std::string> surfaces) {
  if (!valid_category(category)) {
    throw Error(fmt::format("invalid mask category '{}' (expected [A-Z0-9_]+)", category));
  }
  for (const auto& [name, _] : categories_) {
    if (name == category) throw Error(fmt::format("duplicate mask category '{}'", category));
  }
  for (const auto& s : surfaces) {
    if (s.empty()) throw Error(fmt::format("empty surface string in category '{}'", category));
    if (s.find_first_of("[]") != std::string::npos) {
      throw Error(fmt::format("surface string '{}' may not contain brackets", s));
    }
  }
  categories_.emplace_back(std::move(category), std::move(surfaces));
}

bool MaskLexicon::empty() const {
  return std::all_of(categories_.begin(), categories_.end(),
                     [](const auto& c) { return c.second.empty(); });
}

MaskLexicon load_mask_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open mask lexicon '{}'", path.string()));
  try {
    const auto j = nlohmann::ordered_json::parse(in);
    MaskLexicon lex;
    for (const auto& [category, list] : j.items()) {
      lex.add_category(category, list.get<std::vector<std::string>>());
    }
    return lex;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: malformed mask lexicon: {}", path.string(), e.what()));
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::map<std::string, std::string> load_mask_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open mask overrides '{}'", path.string()));
  try {
    return nlohmann::json::parse(in).get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: malformed overrides: {}", path.string(), e.what()));
  }
}

std::string mask_text(std::string_view text, const MaskLexicon& lexicon) {
  return mask_with(text, compile(lexicon));
}

Corpus apply_masks(const Corpus& corpus, const MaskLexicon& lexicon,
                   const std::map<std::string, std::string>& overrides) {
  const auto patterns = compile(lexicon);
  std::vector<Record> records = corpus.records();
  for (auto& r : records) {
    if (auto it = overrides.find(r.utterance.id); it != overrides.end()) {
      r.utterance.text = it->second;
    }
    r.utterance.text = mask_with(r.utterance.text, patterns);
  }
  // Codes were validated on load; accept whatever scheme produced them.
  LabelScheme any;
  for (auto d : kAllDimensions) {
    std::set<std::string> codes;
    for (const auto& r : records) {
      for (const auto& c : r.codes) {
        if (c.dimension == d) codes.insert(c.class_label);
      }
    }
    any.set_classes(d, {codes.begin(), codes.end()});
  }
  return Corpus::from_records(std::move(records), any);
}

}  // namespace cpsfuse::corpus

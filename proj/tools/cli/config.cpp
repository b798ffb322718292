#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace cpsfuse::cli {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "schema_version", "seed", "output_dir", "corpus", "audio_dir", "features",
      "text_embeddings", "audio_embeddings", "models",
      "scheme.social_cognitive", "scheme.affective",
      "mask.lexicon", "mask.overrides",
      "split.test_fraction", "split.val_fraction", "split.min_class_instances", "split.cv_folds",
      "acoustic.frame_step_ms", "acoustic.frame_length_ms", "acoustic.f0_min", "acoustic.f0_max",
      "acoustic.voicing_threshold", "acoustic.feature_names",
      "rf.n_trees", "rf.max_depth", "rf.min_samples_leaf", "rf.max_features", "rf.bootstrap",
      "train.epochs", "train.batch_size", "train.lr", "train.adam_eps", "train.weight_decay",
      "train.text_hidden", "train.audio_hidden", "train.transfer",
      "encode.text_dim", "encode.audio_dim", "encode.window",
      "synth.preset", "synth.mode", "synth.scale", "synth.noise", "synth.classes",
      "synth.audio_only", "synth.keywords_per_class", "synth.fillers", "synth.min_fillers",
      "synth.max_fillers", "synth.duration_s", "synth.snr_db", "synth.f0_jitter"};
  return keys;
}

}  // namespace

bool Config::known_key(const std::string& key) { return known_keys().contains(key); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    auto item = trim(std::string_view(text).substr(pos, end - pos));
    if (!item.empty()) out.push_back(std::move(item));
    pos = end + 1;
  }
  return out;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", origin, lineno));
    }
    try {
      c.set(trim(std::string_view(stripped).substr(0, eq)), trim(std::string_view(stripped).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, lineno, e.what()));
    }
  }
  if (!c.has("schema_version")) {
    throw ConfigError(fmt::format("{}: missing config key 'schema_version'", origin));
  }
  if (c.require("schema_version") != std::to_string(kSchemaVersion)) {
    throw ConfigError(fmt::format("{}: unsupported schema_version '{}' (expected {})", origin,
                                  c.require("schema_version"), kSchemaVersion));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.contains(key); }

const std::string& Config::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("missing config key '{}'", key));
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("config key '{}' expects a number, got '{}'", key, v));
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(key);
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(fmt::format("config key '{}' expects a non-negative integer, got '{}'", key, v));
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = require(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("config key '{}' expects true or false, got '{}'", key, v));
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  return has(key) ? split_list(require(key)) : fallback;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += fmt::format("{} = {}\n", k, v);
  return out;
}

}  // namespace cpsfuse::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpsfuse/error.hpp"

namespace cpsfuse::cli {

/// Bad or missing configuration. Maps to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kSchemaVersion = 1;

/// key = value text, '#' comments. The file must declare schema_version = 1.
/// Unknown keys are rejected so typos do not silently fall back to defaults.
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::string& origin = "<config>");

  /// "key=value" override; later calls win.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  /// Throws ConfigError naming the key when absent.
  const std::string& require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list with surrounding whitespace trimmed.
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  /// Sorted key = value lines.
  std::string dump() const;

  static bool known_key(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace cpsfuse::cli

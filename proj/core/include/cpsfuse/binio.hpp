#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cpsfuse::binio {

/// "CPS1" container: an ordered list of named entries, little-endian.
///
///   magic "CPS1" | u32 version | u32 entry count | entries...
///   entry: u32 name length | name | u8 kind | payload
///     kind 1 (f64 tensor):  u32 rank | rank x u64 dims | f64 data (row-major)
///     kind 2 (i64 array):   u64 count | i64 data
///     kind 3 (string list): u32 count | (u32 length | bytes)...
class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct TensorEntry {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;
  };
  using Payload = std::variant<TensorEntry, std::vector<std::int64_t>, std::vector<std::string>>;

  void put_tensor(std::string name, std::vector<std::uint64_t> shape, std::vector<double> data);
  void put_ints(std::string name, std::vector<std::int64_t> values);
  void put_strings(std::string name, std::vector<std::string> values);

  bool contains(std::string_view name) const;
  const TensorEntry& tensor(std::string_view name) const;
  const std::vector<std::int64_t>& ints(std::string_view name) const;
  const std::vector<std::string>& strings(std::string_view name) const;
  std::vector<std::string> names() const;

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(std::span<const std::uint8_t> bytes);

  void write(const std::filesystem::path& path) const;
  static Container read(const std::filesystem::path& path);

 private:
  void put(std::string name, Payload payload);
  const Payload& get(std::string_view name) const;

  std::vector<std::pair<std::string, Payload>> entries_;
};

}  // namespace cpsfuse::binio

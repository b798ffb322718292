#include "cpsfuse/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::binio {

namespace {

enum Kind : std::uint8_t { kTensor = 1, kInts = 2, kStrings = 3 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = need(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  const std::uint8_t* need(std::size_t n) {
    if (n > in_.size() - pos_) throw DataError("CPS1 container is truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t le(int n) {
    const auto* p = need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put(std::string name, Payload payload) {
  if (contains(name)) throw Error(fmt::format("duplicate container entry '{}'", name));
  entries_.emplace_back(std::move(name), std::move(payload));
}

void Container::put_tensor(std::string name, std::vector<std::uint64_t> shape,
                           std::vector<double> data) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  if (n != data.size()) {
    throw Error(fmt::format("tensor '{}' has {} values for a shape of {} elements", name,
                            data.size(), n));
  }
  put(std::move(name), TensorEntry{std::move(shape), std::move(data)});
}

void Container::put_ints(std::string name, std::vector<std::int64_t> values) {
  put(std::move(name), std::move(values));
}

void Container::put_strings(std::string name, std::vector<std::string> values) {
  put(std::move(name), std::move(values));
}

bool Container::contains(std::string_view name) const {
  for (const auto& [n, _] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Container::Payload& Container::get(std::string_view name) const {
  for (const auto& [n, p] : entries_) {
    if (n == name) return p;
  }
  throw DataError(fmt::format("container has no entry '{}'", name));
}

const Container::TensorEntry& Container::tensor(std::string_view name) const {
  const auto* t = std::get_if<TensorEntry>(&get(name));
  if (!t) throw DataError(fmt::format("container entry '{}' is not a tensor", name));
  return *t;
}

const std::vector<std::int64_t>& Container::ints(std::string_view name) const {
  const auto* t = std::get_if<std::vector<std::int64_t>>(&get(name));
  if (!t) throw DataError(fmt::format("container entry '{}' is not an integer array", name));
  return *t;
}

const std::vector<std::string>& Container::strings(std::string_view name) const {
  const auto* t = std::get_if<std::vector<std::string>>(&get(name));
  if (!t) throw DataError(fmt::format("container entry '{}' is not a string list", name));
  return *t;
}

std::vector<std::string> Container::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : entries_) out.push_back(n);
  return out;
}

std::vector<std::uint8_t> Container::serialize() const {
  Writer w;
  w.bytes("CPS1");
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, payload] : entries_) {
    w.str(name);
    if (const auto* t = std::get_if<TensorEntry>(&payload)) {
      w.u8(kTensor);
      w.u32(static_cast<std::uint32_t>(t->shape.size()));
      for (auto d : t->shape) w.u64(d);
      for (double v : t->data) w.f64(v);
    } else if (const auto* ints = std::get_if<std::vector<std::int64_t>>(&payload)) {
      w.u8(kInts);
      w.u64(ints->size());
      for (auto v : *ints) w.u64(static_cast<std::uint64_t>(v));
    } else {
      const auto& strs = std::get<std::vector<std::string>>(payload);
      w.u8(kStrings);
      w.u32(static_cast<std::uint32_t>(strs.size()));
      for (const auto& s : strs) w.str(s);
    }
  }
  return w.take();
}

Container Container::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CPS1", 4) != 0) {
    throw DataError("not a CPS1 container (bad magic)");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw DataError(fmt::format("unsupported CPS1 version {}", version));
  const std::uint32_t count = r.u32();
  Container c;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = r.str();
    switch (r.u8()) {
      case kTensor: {
        TensorEntry t;
        const std::uint32_t rank = r.u32();
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
          t.shape.push_back(r.u64());
          n *= t.shape.back();
        }
        if (n > r.remaining() / 8) throw DataError("CPS1 container is truncated");
        t.data.resize(n);
        for (auto& v : t.data) v = r.f64();
        c.put(std::move(name), std::move(t));
        break;
      }
      case kInts: {
        const std::uint64_t n = r.u64();
        if (n > r.remaining() / 8) throw DataError("CPS1 container is truncated");
        std::vector<std::int64_t> v(n);
        for (auto& x : v) x = static_cast<std::int64_t>(r.u64());
        c.put(std::move(name), std::move(v));
        break;
      }
      case kStrings: {
        const std::uint32_t n = r.u32();
        std::vector<std::string> v;
        for (std::uint32_t k = 0; k < n; ++k) v.push_back(r.str());
        c.put(std::move(name), std::move(v));
        break;
      }
      default:
        throw DataError(fmt::format("CPS1 entry '{}' has an unknown kind", name));
    }
  }
  if (!r.done()) throw DataError("CPS1 container has trailing bytes");
  return c;
}

void Container::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Container Container::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace cpsfuse::binio

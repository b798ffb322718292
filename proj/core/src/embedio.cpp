#include "cpsfuse/embedio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/rng.hpp"

namespace cpsfuse::embedio {

std::string_view to_string(Modality m) { return m == Modality::Text ? "text" : "audio"; }

EmbeddingStore::EmbeddingStore(Modality modality, std::size_t dimension, std::string source)
    : modality_(modality), dimension_(dimension), source_(std::move(source)) {
  if (dimension_ == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingStore::insert(std::string id, grad::Tensor values) {
  if (index_.contains(id)) throw DataError(fmt::format("duplicate embedding id '{}'", id));
  if (values.cols() != dimension_) {
    throw DataError(fmt::format("embedding '{}' has width {}, store dimension is {}", id,
                                values.cols(), dimension_));
  }
  if (values.rows() == 0) throw DataError(fmt::format("embedding '{}' has no steps", id));
  for (auto& x : values.data) {
    const float f = static_cast<float>(x);
    if (!std::isfinite(f)) throw DataError(fmt::format("embedding '{}' has non-finite values", id));
    x = static_cast<double>(f);
  }
  values.shape = {values.rows(), dimension_};
  values.requires_grad = false;
  values.grad.clear();
  index_.emplace(id, records_.size());
  records_.push_back({std::move(id), std::move(values)});
}

const grad::Tensor* EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second].values;
}

bool EmbeddingStore::operator==(const EmbeddingStore& o) const {
  if (modality_ != o.modality_ || dimension_ != o.dimension_ || source_ != o.source_ ||
      records_.size() != o.records_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = o.records_[i];
    if (a.id != b.id || a.values.shape != b.values.shape) return false;
    if (std::memcmp(a.values.data.data(), b.values.data.data(), a.values.data.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_str(std::vector<std::uint8_t>& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> in) : in_(in) {}
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > in_.size() - pos_) throw DataError(fmt::format("EMB1 file truncated in {}", what));
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    return std::string(reinterpret_cast<const char*>(take(n, what)), n);
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const EmbeddingStore& store) {
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  put_u32(out, kEmbVersion);
  out.push_back(static_cast<std::uint8_t>(store.modality()));
  put_u32(out, static_cast<std::uint32_t>(store.dimension()));
  put_str(out, store.source());
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& r : store.records()) {
    put_str(out, r.id);
    put_u32(out, static_cast<std::uint32_t>(r.values.rows()));
    for (double x : r.values.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return out;
}

EmbeddingStore deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMB1", 4) != 0) {
    throw DataError("not an EMB1 file (bad magic)");
  }
  Cursor c(bytes.subspan(4));
  const std::uint32_t version = c.u32("header");
  if (version != kEmbVersion) throw DataError(fmt::format("unsupported EMB1 version {}", version));
  const std::uint8_t modality = *c.take(1, "header");
  if (modality > 1) throw DataError(fmt::format("unknown EMB1 modality tag {}", modality));
  const std::uint32_t d = c.u32("header");
  if (d == 0) throw DataError("EMB1 header declares dimension 0");
  std::string source = c.str("header");
  EmbeddingStore store(static_cast<Modality>(modality), d, std::move(source));
  const std::uint32_t count = c.u32("header");
  for (std::uint32_t r = 0; r < count; ++r) {
    std::string id = c.str("record id");
    const std::uint32_t t = c.u32("record length");
    if (t == 0) throw DataError(fmt::format("EMB1 record '{}' has T = 0", id));
    const std::uint64_t n = std::uint64_t(t) * d;
    if (n * 4 > c.remaining()) {
      throw DataError(fmt::format(
          "EMB1 record '{}' truncated: {} x {} floats do not fit the file (dimension mismatch?)", id,
          t, d));
    }
    grad::Tensor values = grad::Tensor::zeros(t, d);
    for (auto& x : values.data) x = static_cast<double>(std::bit_cast<float>(c.u32("record data")));
    store.insert(std::move(id), std::move(values));
  }
  if (c.remaining() != 0) {
    throw DataError(fmt::format(
        "EMB1 file has {} trailing bytes; record dimensions disagree with the header", c.remaining()));
  }
  return store;
}

void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto bytes = serialize(store);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
  try {
    return deserialize(bytes);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void ToyTextEncoderConfig::validate() const {
  if (dimension < 2) throw Error("toy text encoder dimension must be >= 2");
}

void ToyAudioEncoderConfig::validate() const {
  if (dimension < 2) throw Error("toy audio encoder dimension must be >= 2");
  if (window < 1) throw Error("toy audio encoder window must be >= 1");
}

namespace {

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string tok(text.substr(i, j - i));
      for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

}  // namespace

grad::Tensor toy_text_encode(std::string_view text, const ToyTextEncoderConfig& config) {
  config.validate();
  const auto tokens = whitespace_tokens(text);
  if (tokens.empty()) throw DataError("cannot encode empty text");
  grad::Tensor out = grad::Tensor::zeros(tokens.size(), config.dimension);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Rng rng(derive_seed(config.seed, fnv1a64(tokens[t])));
    double norm = 0.0;
    for (std::size_t j = 0; j < config.dimension; ++j) {
      const double x = rng.normal();
      out.at(t, j) = x;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < config.dimension; ++j) out.at(t, j) /= norm;
  }
  return out;
}

namespace {

constexpr std::size_t kInvariantDescriptors = 8;

// Window means mapped to roughly unit scale.
std::array<double, kInvariantDescriptors + 1> window_descriptors(
    const acoustic::LldFrameSeries& f, std::size_t begin, std::size_t end) {
  double f0 = 0, jit = 0, shim = 0;
  std::size_t nf0 = 0, njit = 0, nshim = 0;
  double loud = 0, hnr = 0, alpha = 0, hb = 0, s1 = 0, s2 = 0;
  for (std::size_t i = begin; i < end; ++i) {
    if (f.f0[i]) f0 += *f.f0[i], ++nf0;
    if (f.jitter[i]) jit += *f.jitter[i], ++njit;
    if (f.shimmer[i]) shim += *f.shimmer[i], ++nshim;
    loud += f.loudness[i];
    hnr += f.hnr[i];
    alpha += f.alpha_ratio[i];
    hb += f.hammarberg[i];
    s1 += f.slope_0_500[i];
    s2 += f.slope_500_1500[i];
  }
  const double n = static_cast<double>(end - begin);
  auto mean = [](double s, std::size_t k) { return k ? s / static_cast<double>(k) : 0.0; };
  return {(20.0 * std::log10(loud / n + 1e-9) + 30.0) / 10.0,
          nf0 ? (mean(f0, nf0) - 200.0) / 100.0 : 0.0,
          mean(jit, njit) * 50.0,
          mean(shim, nshim) * 10.0,
          hnr / n / 20.0,
          alpha / n / 20.0,
          hb / n / 20.0,
          s1 / n / 10.0,
          s2 / n / 10.0};
}

}  // namespace

grad::Tensor toy_audio_encode(const acoustic::LldFrameSeries& frames,
                              const ToyAudioEncoderConfig& config) {
  config.validate();
  const std::size_t steps = frames.size() / config.window;
  if (steps == 0) {
    throw DataError(fmt::format("clip has {} frames, fewer than one window of {}", frames.size(),
                                config.window));
  }
  const std::size_t d = config.dimension;
  Rng rng(derive_seed(config.seed, 0x617564696fULL));
  std::vector<double> proj(kInvariantDescriptors * (d - 1));
  const double s = 1.0 / std::sqrt(static_cast<double>(kInvariantDescriptors));
  for (auto& p : proj) p = rng.normal() * s;

  grad::Tensor out = grad::Tensor::zeros(steps, d);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto desc = window_descriptors(frames, t * config.window, (t + 1) * config.window);
    out.at(t, 0) = desc[0];
    for (std::size_t j = 1; j < d; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < kInvariantDescriptors; ++k) {
        v += proj[k * (d - 1) + (j - 1)] * desc[k + 1];
      }
      out.at(t, j) = v;
    }
  }
  return out;
}

grad::Tensor toy_audio_encode(const audio::AudioClip& clip, const acoustic::AcousticConfig& acoustic,
                              const ToyAudioEncoderConfig& config) {
  config.validate();
  clip.validate();
  const auto resampled = audio::resample(clip, acoustic.target_rate);
  if (acoustic::frame_count(resampled.samples.size(), acoustic) < config.window) {
    throw DataError("clip is shorter than one encoder window");
  }
  return toy_audio_encode(acoustic::compute_llds(resampled, acoustic), config);
}

CoverageReport align(const corpus::Corpus& corpus, const EmbeddingStore& store, AlignKey key) {
  CoverageReport report;
  std::set<std::string> keys;
  for (const auto& r : corpus.records()) {
    const auto& u = r.utterance;
    if (key == AlignKey::AudioRef && !u.audio_ref) {
      report.missing_from_store.push_back(u.id);
      continue;
    }
    const std::string& k = key == AlignKey::Id ? u.id : *u.audio_ref;
    if (!keys.insert(k).second) continue;
    if (!store.find(k)) report.missing_from_store.push_back(k);
  }
  for (const auto& rec : store.records()) {
    if (!keys.contains(rec.id)) report.absent_from_corpus.push_back(rec.id);
  }
  return report;
}

}  // namespace cpsfuse::embedio

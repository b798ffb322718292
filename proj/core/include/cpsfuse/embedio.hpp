#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/audio.hpp"
#include "cpsfuse/corpus.hpp"
#include "cpsfuse/grad.hpp"

namespace cpsfuse::embedio {

enum class Modality : std::uint8_t { Text = 0, Audio = 1 };
std::string_view to_string(Modality m);

/// T x d encoder outputs for one utterance (or one audio clip).
struct EmbeddingSequence {
  std::string id;
  grad::Tensor values;
};

/// In-memory EMB1 contents. Values are rounded to float precision on insert,
/// so a write/read round trip reproduces the store exactly.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(Modality modality, std::size_t dimension, std::string source);

  /// Throws DataError on a duplicate id, wrong width, T = 0, or non-finite values.
  void insert(std::string id, grad::Tensor values);

  Modality modality() const { return modality_; }
  std::size_t dimension() const { return dimension_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<EmbeddingSequence>& records() const { return records_; }
  const grad::Tensor* find(std::string_view id) const;

  bool operator==(const EmbeddingStore& other) const;

 private:
  Modality modality_ = Modality::Text;
  std::size_t dimension_ = 0;
  std::string source_;
  std::vector<EmbeddingSequence> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::uint32_t kEmbVersion = 1;

std::vector<std::uint8_t> serialize(const EmbeddingStore& store);
EmbeddingStore deserialize(std::span<const std::uint8_t> bytes);
void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_embeddings(const std::filesystem::path& path);

struct ToyTextEncoderConfig {
  std::size_t dimension = 64;
  std::uint64_t seed = 0;
  void validate() const;
};

/// One unit-norm Gaussian row per lowercase whitespace token, seeded by
/// FNV-1a(token) mixed with the config seed.
grad::Tensor toy_text_encode(std::string_view text, const ToyTextEncoderConfig& config);

struct ToyAudioEncoderConfig {
  std::size_t dimension = 32;
  std::size_t window = 20;  // frames per output step
  std::uint64_t seed = 0;
  void validate() const;
};

/// Descriptor means over non-overlapping frame windows, projected to d
/// dimensions. Column 0 carries log loudness alone; the other columns mix the
/// eight scale-invariant descriptors.
grad::Tensor toy_audio_encode(const audio::AudioClip& clip, const acoustic::AcousticConfig& acoustic,
                              const ToyAudioEncoderConfig& config);
/// Same, from precomputed frames.
grad::Tensor toy_audio_encode(const acoustic::LldFrameSeries& frames,
                              const ToyAudioEncoderConfig& config);

enum class AlignKey { Id, AudioRef };

struct CoverageReport {
  std::vector<std::string> missing_from_store;   // corpus keys without a record
  std::vector<std::string> absent_from_corpus;   // store ids not in the corpus
  bool complete() const { return missing_from_store.empty(); }
};

/// Keys are utterance ids or audio_ref values; utterances without an
/// audio_ref are reported missing under their id.
CoverageReport align(const corpus::Corpus& corpus, const EmbeddingStore& store,
                     AlignKey key = AlignKey::Id);

}  // namespace cpsfuse::embedio

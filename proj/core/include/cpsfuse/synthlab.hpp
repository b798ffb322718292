#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpsfuse/audio.hpp"
#include "cpsfuse/corpus.hpp"

namespace cpsfuse::synthlab {

enum class ChannelMode { TextOnly, AudioOnly, Mixed };
std::string to_string(ChannelMode m);
ChannelMode parse_channel_mode(const std::string& text);

struct ClassSpec {
  std::string code;
  corpus::Dimension dimension = corpus::Dimension::SocialCognitive;
  std::size_t count = 0;
  /// Keyword phrases (one or more space-separated tokens).
  std::vector<std::string> keywords;
  /// When set, this class uses the named class's phrases with the token order
  /// reversed. Bag-of-words features cannot tell the two apart.
  std::string reorder_of;
  /// Mixed mode only: text carries fillers alone, the class shows in audio.
  bool audio_only_signal = false;
};

struct SynthSpec {
  std::vector<ClassSpec> classes;
  ChannelMode mode = ChannelMode::TextOnly;
  /// Probability that the keyword phrase is replaced by a filler.
  double keyword_noise = 0.0;
  std::vector<std::string> fillers;
  std::size_t min_fillers = 3;
  std::size_t max_fillers = 7;
  std::uint64_t seed = 0;

  /// Resolved phrases per class (reorder_of applied).
  std::map<std::string, std::vector<std::string>> phrases() const;
  /// Throws Error on empty/duplicate codes, zero counts, overlapping phrase
  /// sets, fillers that collide with phrase tokens, or mode conflicts.
  void validate() const;
};

struct ClassAudio {
  double f0 = 150.0;
  double amplitude = 0.2;
};

struct SynthAudioSpec {
  std::map<std::string, ClassAudio> per_class;
  double f0_jitter = 4.0;          // Hz, std of the per-clip f0
  double amplitude_jitter = 0.05;  // relative std of the per-clip amplitude
  double duration_s = 0.5;
  double sample_rate = 16000.0;
  double snr_db = 30.0;

  /// Evenly spaced f0 in [110, 320] Hz, amplitudes cycling 0.1/0.15/0.2.
  static SynthAudioSpec for_classes(const std::vector<std::string>& codes);
  void validate(const SynthSpec& spec) const;
};

struct GeneratedCorpus {
  corpus::Corpus corpus;
  corpus::LabelScheme scheme;
  std::map<std::string, audio::AudioClip> clips;  // keyed by audio_ref
};

/// One single-coded utterance per instance, classes interleaved by a seeded
/// shuffle. Deterministic under spec.seed.
GeneratedCorpus generate_corpus(const SynthSpec& spec, const SynthAudioSpec& audio);

/// Harmonic tone (partials 1/k up to Nyquist) whose RMS equals that of a
/// sine of the given amplitude, plus white noise at snr_db.
audio::AudioClip synthesize_clip(const ClassAudio& params, double duration_s, double sample_rate,
                                 double snr_db, std::uint64_t seed);

/// Pronounceable pseudo-words, distinct, none of length < 4, none in avoid.
std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed,
                                      const std::vector<std::string>& avoid = {});

/// Reference class totals for both dimensions, multiplied by scale (rounded,
/// at least 1). SS4 and SS5 reuse reversed SC1 and SS2 phrases.
SynthSpec reference_preset(ChannelMode mode, std::uint64_t seed, double scale = 1.0);

/// Counts of the unscaled preset, scheme order.
const std::vector<std::size_t>& reference_social_counts();
const std::vector<std::size_t>& reference_affective_counts();

/// "id,dimension,class" rows.
std::string gold_csv(const corpus::Corpus& corpus);

/// Returns the class whose phrase occurs in text (ordered token match), or
/// an empty string. The lookup baseline for text_only corpora.
std::string keyword_lookup(const SynthSpec& spec, const std::string& text);

}  // namespace cpsfuse::synthlab

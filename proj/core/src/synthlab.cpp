#include "cpsfuse/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/rng.hpp"

namespace cpsfuse::synthlab {

std::string to_string(ChannelMode m) {
  switch (m) {
    case ChannelMode::TextOnly:
      return "text_only";
    case ChannelMode::AudioOnly:
      return "audio_only";
    case ChannelMode::Mixed:
      break;
  }
  return "mixed";
}

ChannelMode parse_channel_mode(const std::string& text) {
  if (text == "text_only") return ChannelMode::TextOnly;
  if (text == "audio_only") return ChannelMode::AudioOnly;
  if (text == "mixed") return ChannelMode::Mixed;
  throw Error(fmt::format("unknown channel mode '{}' (text_only, audio_only, mixed)", text));
}

namespace {

std::vector<std::string> split_tokens(const std::string& phrase) {
  std::istringstream in(phrase);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::string reversed_phrase(const std::string& phrase) {
  auto t = split_tokens(phrase);
  std::reverse(t.begin(), t.end());
  return fmt::format("{}", fmt::join(t, " "));
}

}  // namespace

std::map<std::string, std::vector<std::string>> SynthSpec::phrases() const {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& c : classes) {
    if (c.reorder_of.empty()) out[c.code] = c.keywords;
  }
  for (const auto& c : classes) {
    if (c.reorder_of.empty()) continue;
    auto it = out.find(c.reorder_of);
    if (it == out.end()) {
      throw Error(fmt::format("class '{}' reorders unknown or reordered class '{}'", c.code, c.reorder_of));
    }
    auto& mine = out[c.code];
    for (const auto& p : it->second) mine.push_back(reversed_phrase(p));
  }
  return out;
}

void SynthSpec::validate() const {
  if (classes.empty()) throw Error("synthetic spec has no classes");
  if (!(keyword_noise >= 0.0 && keyword_noise < 1.0)) throw Error("keyword_noise must be in [0, 1)");
  if (min_fillers > max_fillers) throw Error("min_fillers exceeds max_fillers");
  if (max_fillers > 0 && fillers.empty()) throw Error("filler vocabulary is empty");
  if ((keyword_noise > 0.0 || mode == ChannelMode::AudioOnly) && fillers.empty()) {
    throw Error("filler vocabulary is empty");
  }
  std::set<std::string> codes;
  for (const auto& c : classes) {
    if (c.code.empty()) throw Error("empty class code");
    if (!codes.insert(c.code).second) throw Error(fmt::format("duplicate class code '{}'", c.code));
    if (c.count < 1) throw Error(fmt::format("class '{}' has count 0", c.code));
    if (c.audio_only_signal && mode != ChannelMode::Mixed) {
      throw Error(fmt::format("class '{}' is audio-only but the mode is {}", c.code, to_string(mode)));
    }
  }
  const auto resolved = phrases();
  std::map<std::string, std::string> owner;
  std::set<std::string> phrase_tokens;
  for (const auto& c : classes) {
    const auto& ps = resolved.at(c.code);
    const bool needs_text = mode == ChannelMode::TextOnly ||
                            (mode == ChannelMode::Mixed && !c.audio_only_signal);
    if (needs_text && ps.empty()) throw Error(fmt::format("class '{}' has no keywords", c.code));
    for (const auto& p : ps) {
      const auto toks = split_tokens(p);
      if (toks.empty()) throw Error(fmt::format("class '{}' has an empty keyword", c.code));
      const std::string norm = fmt::format("{}", fmt::join(toks, " "));
      auto [it, fresh] = owner.emplace(norm, c.code);
      if (!fresh && it->second != c.code) {
        throw Error(fmt::format("keyword '{}' is shared by classes '{}' and '{}'", norm, it->second, c.code));
      }
      phrase_tokens.insert(toks.begin(), toks.end());
    }
  }
  for (const auto& f : fillers) {
    if (f.empty() || f.find(' ') != std::string::npos) throw Error("fillers must be single tokens");
    if (phrase_tokens.contains(f)) throw Error(fmt::format("filler '{}' is also a keyword token", f));
  }
}

SynthAudioSpec SynthAudioSpec::for_classes(const std::vector<std::string>& codes) {
  SynthAudioSpec s;
  const double lo = 110.0, hi = 320.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const double f0 = codes.size() == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) /
                                                        static_cast<double>(codes.size() - 1);
    s.per_class[codes[i]] = {f0, 0.1 + 0.05 * static_cast<double>(i % 3)};
  }
  if (codes.size() > 1) {
    s.f0_jitter = std::min(s.f0_jitter, (hi - lo) / static_cast<double>(codes.size() - 1) / 4.0);
  }
  return s;
}

void SynthAudioSpec::validate(const SynthSpec& spec) const {
  if (spec.mode == ChannelMode::TextOnly) return;
  if (!(duration_s > 0.0) || !(sample_rate > 0.0)) throw Error("clip duration and rate must be positive");
  if (f0_jitter < 0.0 || amplitude_jitter < 0.0) throw Error("jitter must be non-negative");
  if (snr_db < 20.0) throw Error("snr_db must be at least 20");
  std::vector<double> f0s;
  for (const auto& c : spec.classes) {
    auto it = per_class.find(c.code);
    if (it == per_class.end()) throw Error(fmt::format("no audio parameters for class '{}'", c.code));
    if (!(it->second.f0 > 0.0) || it->second.f0 >= sample_rate / 2.0) {
      throw Error(fmt::format("class '{}' f0 must lie in (0, Nyquist)", c.code));
    }
    if (!(it->second.amplitude > 0.0)) throw Error(fmt::format("class '{}' amplitude must be positive", c.code));
    f0s.push_back(it->second.f0);
  }
  std::sort(f0s.begin(), f0s.end());
  for (std::size_t i = 1; i < f0s.size(); ++i) {
    if (f0s[i] - f0s[i - 1] < 4.0 * f0_jitter) {
      throw Error(fmt::format("class f0 values {} and {} are closer than 4x the jitter", f0s[i - 1], f0s[i]));
    }
  }
}

audio::AudioClip synthesize_clip(const ClassAudio& params, double duration_s, double sample_rate,
                                 double snr_db, std::uint64_t seed) {
  if (!(sample_rate > 0.0) || !(duration_s > 0.0)) throw Error("clip duration and rate must be positive");
  if (!(params.f0 > 0.0) || params.f0 >= sample_rate / 2.0) {
    throw Error(fmt::format("f0 {} Hz is outside (0, {}) Hz", params.f0, sample_rate / 2.0));
  }
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const auto harmonics = std::clamp<std::size_t>(
      static_cast<std::size_t>((sample_rate / 2.0 - 1.0) / params.f0), 1, 12);
  std::vector<double> phase(harmonics);
  double power = 0.0;
  for (std::size_t k = 0; k < harmonics; ++k) {
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    power += 0.5 / static_cast<double>((k + 1) * (k + 1));
  }
  const double target_rms = params.amplitude / std::numbers::sqrt2;
  const double gain = target_rms / std::sqrt(power);
  const double noise_rms = target_rms * std::pow(10.0, -snr_db / 20.0);
  audio::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double s = 0.0;
    for (std::size_t k = 0; k < harmonics; ++k) {
      const double kk = static_cast<double>(k + 1);
      s += std::sin(2.0 * std::numbers::pi * kk * params.f0 * t + phase[k]) / kk;
    }
    clip.samples[i] = gain * s + noise_rms * rng.normal();
  }
  return clip;
}

std::vector<std::string> pseudo_words(std::size_t count, std::uint64_t seed,
                                      const std::vector<std::string>& avoid) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  Rng rng(seed);
  std::set<std::string> seen(avoid.begin(), avoid.end());
  std::vector<std::string> out;
  while (out.size() < count) {
    const std::size_t syllables = 2 + rng.below(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += consonants[rng.below(consonants.size())];
      w += vowels[rng.below(vowels.size())];
    }
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

const std::vector<std::size_t>& reference_social_counts() {
  static const std::vector<std::size_t> c{215, 1223, 349, 27, 94, 126, 22, 51, 1590, 859};
  return c;
}

const std::vector<std::size_t>& reference_affective_counts() {
  static const std::vector<std::size_t> c{569, 920, 39};
  return c;
}

SynthSpec reference_preset(ChannelMode mode, std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw Error("preset scale must be positive");
  const auto scheme = corpus::LabelScheme::defaults();
  const auto& social = scheme.classes(corpus::Dimension::SocialCognitive);
  const auto& affective = scheme.classes(corpus::Dimension::Affective);
  constexpr std::size_t kPhrases = 4;
  constexpr std::size_t kFillers = 60;
  const std::size_t n_classes = social.size() + affective.size();
  const auto words = pseudo_words(n_classes * kPhrases * 2 + kFillers, derive_seed(seed, 0x7461626c65ULL));

  SynthSpec spec;
  spec.mode = mode;
  spec.seed = seed;
  spec.keyword_noise = 0.02;
  std::size_t w = 0;
  auto add = [&](const std::string& code, corpus::Dimension d, std::size_t total) {
    ClassSpec c;
    c.code = code;
    c.dimension = d;
    c.count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(total) * scale)));
    for (std::size_t p = 0; p < kPhrases; ++p, w += 2) c.keywords.push_back(words[w] + " " + words[w + 1]);
    spec.classes.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < social.size(); ++i) {
    add(social[i], corpus::Dimension::SocialCognitive, reference_social_counts()[i]);
  }
  for (std::size_t i = 0; i < affective.size(); ++i) {
    add(affective[i], corpus::Dimension::Affective, reference_affective_counts()[i]);
  }
  for (auto& c : spec.classes) {
    if (c.code == "SS4") c.reorder_of = "SC1";
    if (c.code == "SS5") c.reorder_of = "SS2";
    if (!c.reorder_of.empty()) c.keywords.clear();
  }
  spec.fillers.assign(words.begin() + static_cast<std::ptrdiff_t>(w), words.end());
  return spec;
}

GeneratedCorpus generate_corpus(const SynthSpec& spec, const SynthAudioSpec& audio_spec) {
  spec.validate();
  audio_spec.validate(spec);
  const auto phrases = spec.phrases();

  GeneratedCorpus out;
  for (auto d : corpus::kAllDimensions) {
    std::vector<std::string> codes;
    for (const auto& c : spec.classes) {
      if (c.dimension == d) codes.push_back(c.code);
    }
    out.scheme.set_classes(d, std::move(codes));
  }

  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) order.insert(order.end(), spec.classes[k].count, k);
  Rng(derive_seed(spec.seed, 1)).shuffle(order);

  const bool with_audio = spec.mode != ChannelMode::TextOnly;
  const std::uint64_t instance_master = derive_seed(spec.seed, 2);
  std::vector<corpus::Record> records;
  std::int64_t clock_ms = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    const auto& cls = spec.classes[order[n]];
    Rng rng(derive_seed(instance_master, n));
    const std::size_t k = spec.min_fillers + rng.below(spec.max_fillers - spec.min_fillers + 1);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < k; ++i) tokens.push_back(spec.fillers[rng.below(spec.fillers.size())]);
    const bool text_signal = spec.mode == ChannelMode::TextOnly ||
                             (spec.mode == ChannelMode::Mixed && !cls.audio_only_signal);
    if (text_signal) {
      const auto& ps = phrases.at(cls.code);
      const auto pos = static_cast<std::ptrdiff_t>(rng.below(tokens.size() + 1));
      if (rng.uniform() < spec.keyword_noise) {
        tokens.insert(tokens.begin() + pos, spec.fillers[rng.below(spec.fillers.size())]);
      } else {
        const auto phrase = split_tokens(ps[rng.below(ps.size())]);
        tokens.insert(tokens.begin() + pos, phrase.begin(), phrase.end());
      }
    }
    if (tokens.empty()) tokens.push_back(spec.fillers[rng.below(spec.fillers.size())]);

    corpus::Record r;
    auto& u = r.utterance;
    u.id = fmt::format("syn{:05d}", n);
    u.triad_id = fmt::format("T{:03d}", n / 30);
    u.speaker_id = fmt::format("P{}", rng.below(3));
    u.text = fmt::format("{}", fmt::join(tokens, " "));
    u.start_ms = clock_ms;
    const auto dur_ms = with_audio ? static_cast<std::int64_t>(std::llround(audio_spec.duration_s * 1000.0))
                                   : static_cast<std::int64_t>(400 + 250 * tokens.size());
    u.end_ms = clock_ms + dur_ms;
    clock_ms = u.end_ms + 200;
    if (with_audio) {
      const auto& base = audio_spec.per_class.at(cls.code);
      ClassAudio p;
      p.f0 = base.f0 + audio_spec.f0_jitter * rng.normal();
      p.amplitude = base.amplitude * std::max(0.2, 1.0 + audio_spec.amplitude_jitter * rng.normal());
      u.audio_ref = u.id + ".wav";
      out.clips[*u.audio_ref] = synthesize_clip(p, audio_spec.duration_s, audio_spec.sample_rate,
                                                audio_spec.snr_db, rng.next());
    }
    r.codes.push_back({cls.dimension, cls.code});
    records.push_back(std::move(r));
  }
  out.corpus = corpus::Corpus::from_records(std::move(records), out.scheme);
  return out;
}

std::string gold_csv(const corpus::Corpus& corpus) {
  std::string out = "id,dimension,class\n";
  for (const auto& r : corpus.records()) {
    for (const auto& c : r.codes) {
      out += fmt::format("{},{},{}\n", r.utterance.id, corpus::to_string(c.dimension), c.class_label);
    }
  }
  return out;
}

std::string keyword_lookup(const SynthSpec& spec, const std::string& text) {
  const auto tokens = split_tokens(text);
  const auto phrases = spec.phrases();
  for (const auto& c : spec.classes) {
    for (const auto& p : phrases.at(c.code)) {
      const auto pt = split_tokens(p);
      if (std::search(tokens.begin(), tokens.end(), pt.begin(), pt.end()) != tokens.end()) return c.code;
    }
  }
  return {};
}

}  // namespace cpsfuse::synthlab

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/error.hpp"
#include "cpsfuse/synthlab.hpp"

using namespace cpsfuse;
using namespace cpsfuse::synthlab;

namespace {

std::map<std::string, std::size_t> class_counts(const corpus::Corpus& c) {
  std::map<std::string, std::size_t> out;
  for (const auto& r : c.records()) ++out[r.codes.at(0).class_label];
  return out;
}

double mean_f0(const audio::AudioClip& clip) {
  acoustic::AcousticConfig cfg;
  const auto f = acoustic::compute_llds(clip, cfg);
  double s = 0;
  std::size_t n = 0;
  for (const auto& v : f.f0) {
    if (v) s += *v, ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

TEST(Preset, CountsFollowScale) {
  const auto spec = reference_preset(ChannelMode::TextOnly, 1, 0.5);
  const auto g = generate_corpus(spec, SynthAudioSpec{});
  const auto counts = class_counts(g.corpus);
  const auto scheme = corpus::LabelScheme::defaults();
  const auto& social = scheme.classes(corpus::Dimension::SocialCognitive);
  for (std::size_t i = 0; i < social.size(); ++i) {
    const auto want = std::max<std::size_t>(1, std::llround(reference_social_counts()[i] * 0.5));
    EXPECT_EQ(counts.at(social[i]), want) << social[i];
  }
  std::size_t total = 0;
  for (const auto& c : spec.classes) total += c.count;
  EXPECT_EQ(g.corpus.size(), total);
}

TEST(Preset, UnscaledTotals) {
  std::size_t s = 0, a = 0;
  for (auto v : reference_social_counts()) s += v;
  for (auto v : reference_affective_counts()) a += v;
  EXPECT_EQ(s, 4556u);
  EXPECT_EQ(a, 1528u);
}

TEST(Preset, OrderTwinsReuseReversedPhrases) {
  const auto spec = reference_preset(ChannelMode::TextOnly, 3, 0.1);
  const auto p = spec.phrases();
  ASSERT_EQ(p.at("SS4").size(), p.at("SC1").size());
  for (std::size_t i = 0; i < p.at("SC1").size(); ++i) {
    const auto& orig = p.at("SC1")[i];
    const auto sp = orig.find(' ');
    EXPECT_EQ(p.at("SS4")[i], orig.substr(sp + 1) + " " + orig.substr(0, sp));
  }
  EXPECT_NO_THROW(spec.validate());
}

TEST(Generate, DeterministicAndSeedSensitive) {
  const auto spec = reference_preset(ChannelMode::TextOnly, 4, 0.05);
  const auto a = generate_corpus(spec, {});
  const auto b = generate_corpus(spec, {});
  EXPECT_EQ(gold_csv(a.corpus), gold_csv(b.corpus));
  for (std::size_t i = 0; i < a.corpus.size(); ++i) {
    EXPECT_EQ(a.corpus.records()[i].utterance.text, b.corpus.records()[i].utterance.text);
  }
  const auto c = generate_corpus(reference_preset(ChannelMode::TextOnly, 5, 0.05), {});
  EXPECT_NE(gold_csv(a.corpus), gold_csv(c.corpus));
}

TEST(Generate, KeywordLookupIsExactWithoutNoise) {
  auto spec = reference_preset(ChannelMode::TextOnly, 6, 0.1);
  spec.keyword_noise = 0.0;
  const auto g = generate_corpus(spec, {});
  for (const auto& r : g.corpus.records()) {
    EXPECT_EQ(keyword_lookup(spec, r.utterance.text), r.codes[0].class_label) << r.utterance.text;
  }
}

TEST(Generate, AudioOnlyClassesCarryNoKeywords) {
  SynthSpec spec;
  spec.mode = ChannelMode::Mixed;
  spec.seed = 2;
  spec.fillers = pseudo_words(20, 9);
  spec.classes = {{"SS1", corpus::Dimension::SocialCognitive, 6, {"alpha beta"}, "", false},
                  {"SS2", corpus::Dimension::SocialCognitive, 6, {}, "", true}};
  auto audio = SynthAudioSpec::for_classes({"SS1", "SS2"});
  audio.duration_s = 0.2;
  const auto g = generate_corpus(spec, audio);
  EXPECT_EQ(g.clips.size(), 12u);
  for (const auto& r : g.corpus.records()) {
    const bool audio_only = r.codes[0].class_label == "SS2";
    EXPECT_EQ(keyword_lookup(spec, r.utterance.text).empty(), audio_only);
    ASSERT_TRUE(r.utterance.audio_ref.has_value());
    EXPECT_EQ(g.clips.at(*r.utterance.audio_ref).samples.size(), 3200u);
  }
  spec.mode = ChannelMode::TextOnly;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(Spec, Validation) {
  SynthSpec spec;
  spec.fillers = {"zzzz"};
  spec.classes = {{"A", corpus::Dimension::SocialCognitive, 1, {"x y"}, "", false},
                  {"B", corpus::Dimension::SocialCognitive, 1, {"x y"}, "", false}};
  EXPECT_THROW(spec.validate(), Error);
  spec.classes[1].keywords = {"zzzz"};
  EXPECT_THROW(spec.validate(), Error);
  spec.classes[1].keywords = {"w"};
  spec.classes[1].count = 0;
  EXPECT_THROW(spec.validate(), Error);
  spec.classes[1].count = 1;
  EXPECT_NO_THROW(spec.validate());
}

TEST(Clip, LengthAndPitch) {
  const auto clip = synthesize_clip({180.0, 0.2}, 1.0, 16000.0, 30.0, 1);
  EXPECT_EQ(clip.samples.size(), 16000u);
  EXPECT_NEAR(mean_f0(clip), 180.0, 10.0);
  double ss = 0;
  for (double s : clip.samples) ss += s * s;
  EXPECT_NEAR(std::sqrt(ss / 16000.0), 0.2 / std::sqrt(2.0), 0.01);
}

TEST(Clip, ClassesSeparateByPitch) {
  const double lo = mean_f0(synthesize_clip({150.0, 0.2}, 0.5, 16000.0, 30.0, 2));
  const double hi = mean_f0(synthesize_clip({300.0, 0.2}, 0.5, 16000.0, 30.0, 3));
  EXPECT_GT(hi - lo, 100.0);
}

TEST(Clip, Errors) {
  EXPECT_THROW(synthesize_clip({9000.0, 0.2}, 0.5, 16000.0, 30.0, 1), Error);
  EXPECT_THROW(synthesize_clip({100.0, 0.2}, 0.0, 16000.0, 30.0, 1), Error);
  SynthSpec spec;
  spec.mode = ChannelMode::AudioOnly;
  spec.fillers = {"qqqq"};
  spec.classes = {{"A", corpus::Dimension::Affective, 1, {}, "", false}};
  SynthAudioSpec audio;
  audio.per_class["A"] = {9000.0, 0.2};
  EXPECT_THROW(generate_corpus(spec, audio), Error);
}

TEST(PseudoWords, DistinctAndAvoiding) {
  const auto w = pseudo_words(200, 1, {"bala"});
  std::set<std::string> s(w.begin(), w.end());
  EXPECT_EQ(s.size(), 200u);
  EXPECT_FALSE(s.contains("bala"));
  for (const auto& x : w) EXPECT_GE(x.size(), 4u);
  EXPECT_EQ(w, pseudo_words(200, 1, {"bala"}));
}

TEST(ChannelModeNames, RoundTrip) {
  for (auto m : {ChannelMode::TextOnly, ChannelMode::AudioOnly, ChannelMode::Mixed}) {
    EXPECT_EQ(parse_channel_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_channel_mode("stereo"), Error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cpsfuse/acoustic.hpp"
#include "cpsfuse/error.hpp"
#include "cpsfuse/rng.hpp"
#include "oracles.hpp"

using namespace cpsfuse;
using namespace cpsfuse::acoustic;

namespace {

audio::AudioClip tone(double f, double seconds, double amp, double rate = 16000.0, bool saw = false) {
  audio::AudioClip c;
  c.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(rate * seconds));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double phase = f * t - std::floor(f * t);
    c.samples.push_back(saw ? amp * (2.0 * phase - 1.0) : amp * std::sin(2.0 * std::numbers::pi * f * t));
  }
  return c;
}

audio::AudioClip noise(double seconds, double rms, std::uint64_t seed) {
  audio::AudioClip c;
  Rng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(16000 * seconds); ++i) c.samples.push_back(rms * rng.normal());
  return c;
}

AcousticConfig coarse() {
  AcousticConfig c;
  c.frame_step_ms = 10.0;
  return c;
}

std::size_t index_of(const std::string& name) {
  const auto names = default_feature_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

}  // namespace

TEST(AcousticConfig, DefaultsAndValidation) {
  AcousticConfig c;
  EXPECT_EQ(c.frame_length_samples(), 400u);
  EXPECT_EQ(c.frame_step_samples(), 16u);
  EXPECT_EQ(c.feature_names.size(), kFeatureCount);
  c.frame_step_ms = 30.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.f0_min = 600.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.feature_names.pop_back();
  EXPECT_THROW(c.validate(), Error);
}

TEST(FrameCount, FormulaForAllLengths) {
  const AcousticConfig c;
  EXPECT_EQ(frame_count(399, c), 0u);
  for (std::size_t n = 400; n < 1200; n += 7) {
    EXPECT_EQ(frame_count(n, c), (n - 400) / 16 + 1);
    EXPECT_EQ(compute_llds(tone(200, static_cast<double>(n) / 16000.0, 0.3), c).size(), frame_count(n, c));
  }
}

TEST(Llds, SineRms) {
  for (double a : {0.1, 0.5, 0.9}) {
    const auto frames = compute_llds(tone(250, 0.3, a), coarse());
    for (double v : frames.loudness) EXPECT_NEAR(v, a / std::sqrt(2.0), 0.01 * a / std::sqrt(2.0));
  }
}

TEST(Llds, SawtoothPitch) {
  const auto f = extract_features(tone(200, 1.0, 0.5, 16000, true), AcousticConfig{});
  EXPECT_NEAR(f[index_of("f0_mean")], 200.0, 5.0);
}

TEST(Llds, SilenceIsUnvoiced) {
  audio::AudioClip c;
  c.samples.assign(8000, 0.0);
  const auto frames = compute_llds(c, coarse());
  EXPECT_EQ(frames.voiced_count(), 0u);
  for (double v : frames.loudness) EXPECT_LT(v, 1e-6);
  const auto f = summarize(frames, coarse());
  EXPECT_EQ(f[index_of("f0_mean")], 0.0);
  EXPECT_EQ(f[index_of("jitter_mean")], 0.0);
}

TEST(Llds, ShortClipIsAnError) {
  EXPECT_THROW(compute_llds(tone(200, 0.01, 0.5), AcousticConfig{}), Error);
}

TEST(Summarize, HarmonicityGap) {
  const auto s = extract_features(tone(220, 0.5, 0.3), coarse());
  const auto n = extract_features(noise(0.5, 0.3 / std::sqrt(2.0), 9), coarse());
  EXPECT_GE(s[index_of("hnr_mean")] - n[index_of("hnr_mean")], 20.0);
}

TEST(Summarize, ConstantFramesHaveZeroStd) {
  LldFrameSeries frames;
  for (int i = 0; i < 5; ++i) {
    frames.time_s.push_back(i * 0.01);
    frames.f0.emplace_back(150.0);
    frames.loudness.push_back(0.2);
    frames.jitter.emplace_back(0.01);
    frames.shimmer.emplace_back(0.02);
    frames.hnr.push_back(10.0);
    frames.alpha_ratio.push_back(-5.0);
    frames.hammarberg.push_back(12.0);
    frames.slope_0_500.push_back(1.0);
    frames.slope_500_1500.push_back(-3.0);
  }
  const auto f = summarize(frames, AcousticConfig{});
  EXPECT_EQ(f[index_of("f0_std")], 0.0);
  EXPECT_EQ(f[index_of("loudness_std")], 0.0);
  EXPECT_DOUBLE_EQ(f[index_of("f0_mean")], 150.0);
  EXPECT_DOUBLE_EQ(f[index_of("slope500_1500_mean")], -3.0);
  EXPECT_THROW(summarize(LldFrameSeries{}, AcousticConfig{}), Error);
}

TEST(Summarize, CustomFeatureOrder) {
  auto cfg = coarse();
  std::reverse(cfg.feature_names.begin(), cfg.feature_names.end());
  const auto a = extract_features(tone(180, 0.3, 0.4), coarse());
  const auto b = extract_features(tone(180, 0.3, 0.4), cfg);
  for (std::size_t i = 0; i < kFeatureCount; ++i) EXPECT_EQ(a[i], b[kFeatureCount - 1 - i]);
}

TEST(Extraction, AmplitudeScalingInvariance) {
  const auto base = tone(170, 0.4, 0.2, 16000, true);
  auto scaled = base;
  for (auto& s : scaled.samples) s *= 3.0;
  const auto a = extract_features(base, coarse());
  const auto b = extract_features(scaled, coarse());
  for (const auto* name : {"f0_mean", "f0_std", "jitter_mean", "shimmer_mean", "hnr_mean", "alpha_ratio_mean",
                           "hammarberg_mean", "slope0_500_mean", "slope500_1500_mean"}) {
    const double x = a[index_of(name)], y = b[index_of(name)];
    EXPECT_LE(std::abs(x - y), 1e-6 * std::max(1.0, std::abs(x))) << name;
  }
  EXPECT_NEAR(b[index_of("loudness_mean")], 3.0 * a[index_of("loudness_mean")], 1e-9);
}

TEST(Extraction, DeterministicAndResampleConsistent) {
  const auto c = tone(240, 0.4, 0.3, 16000, true);
  const auto a = extract_features(c, coarse());
  const auto b = extract_features(c, coarse());
  EXPECT_EQ(a, b);
  for (double f : {110.0, 250.0, 390.0}) {
    const auto at8k = extract_features(tone(f, 0.4, 0.3, 8000, true), coarse());
    const auto at16k = extract_features(tone(f, 0.4, 0.3, 16000, true), coarse());
    EXPECT_NEAR(at8k[index_of("f0_mean")], at16k[index_of("f0_mean")], 5.0) << f;
  }
}

TEST(FeatureCsv, RoundTrip) {
  oracle::TempDir dir("feat");
  std::vector<FeatureRow> rows(2);
  rows[0].id = "u1";
  rows[1].id = "u2";
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    rows[0].values[i] = 0.1 * static_cast<double>(i) + 1e-13;
    rows[1].values[i] = -3.0e5 / static_cast<double>(i + 1);
  }
  write_feature_csv(dir / "f.csv", default_feature_names(), rows);
  const auto text = oracle::read_text(dir / "f.csv");
  EXPECT_EQ(text.rfind("id,f0_mean,f0_std,", 0), 0u);
  const auto back = read_feature_csv(dir / "f.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].id, "u2");
  EXPECT_EQ(back[0].values, rows[0].values);
  EXPECT_EQ(back[1].values, rows[1].values);
  oracle::write_text(dir / "bad.csv", "id,a\nu1,1\n");
  EXPECT_THROW(read_feature_csv(dir / "bad.csv"), DataError);
}

#include <gtest/gtest.h>

#include <cmath>

#include "cpsfuse/embedio.hpp"
#include "cpsfuse/error.hpp"
#include "cpsfuse/synthlab.hpp"
#include "oracles.hpp"

using namespace cpsfuse;
using namespace cpsfuse::embedio;
using grad::Tensor;

namespace {

EmbeddingStore sample_store() {
  EmbeddingStore s(Modality::Text, 3, "unit");
  s.insert("u1", Tensor::matrix(2, 3, {0.1, 0.2, 0.3, -1, 2, 1e-3}));
  s.insert("u2", Tensor::matrix(1, 3, {7, 8, 9}));
  return s;
}

corpus::Record record(const std::string& id, std::optional<std::string> audio) {
  corpus::Record r;
  r.utterance = {id, "t1", "s1", 0, 1000, "hello", std::move(audio)};
  return r;
}

}  // namespace

TEST(Emb1, RoundTripIsExact) {
  const auto s = sample_store();
  const auto back = deserialize(serialize(s));
  EXPECT_TRUE(back == s);
  EXPECT_EQ(back.source(), "unit");
  EXPECT_EQ(back.records()[0].values.shape, (std::vector<std::size_t>{2, 3}));
  oracle::TempDir dir("emb");
  write_embeddings(s, dir / "x.emb1");
  EXPECT_TRUE(read_embeddings(dir / "x.emb1") == s);
}

TEST(Emb1, ValuesAreFloatRounded) {
  EmbeddingStore s(Modality::Audio, 1, "");
  s.insert("a", Tensor::matrix(1, 1, {0.1}));
  EXPECT_EQ(s.find("a")->data[0], static_cast<double>(0.1f));
  EXPECT_EQ(s.find("missing"), nullptr);
}

TEST(Emb1, InsertValidation) {
  auto s = sample_store();
  EXPECT_THROW(s.insert("u1", Tensor::matrix(1, 3, {0, 0, 0})), DataError);
  EXPECT_THROW(s.insert("u3", Tensor::matrix(1, 2, {0, 0})), DataError);
  EXPECT_THROW(s.insert("u4", Tensor::zeros(0, 3)), DataError);
  EXPECT_THROW(s.insert("u5", Tensor::matrix(1, 3, {0, NAN, 0})), DataError);
}

TEST(Emb1, RejectsCorruptBytes) {
  auto bytes = serialize(sample_store());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), DataError);
  for (std::size_t cut : {std::size_t{3}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize(std::span(bytes.data(), cut)), DataError) << cut;
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(deserialize(extra), DataError);
}

TEST(Emb1, MissingFileIsDataError) {
  EXPECT_THROW(read_embeddings("/nonexistent/path/x.emb1"), DataError);
}

TEST(ToyText, PerTokenUnitRows) {
  ToyTextEncoderConfig cfg{16, 3};
  const auto t = toy_text_encode("Solve it solve", cfg);
  ASSERT_EQ(t.rows(), 3u);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(t.at(0, j), t.at(2, j));
  for (std::size_t r = 0; r < 3; ++r) {
    double n = 0;
    for (std::size_t j = 0; j < 16; ++j) n += t.at(r, j) * t.at(r, j);
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
  EXPECT_EQ(toy_text_encode("solve it solve", cfg).data, t.data);
  EXPECT_NE(toy_text_encode("solve", ToyTextEncoderConfig{16, 4}).data, toy_text_encode("solve", cfg).data);
  EXPECT_THROW(toy_text_encode("   ", cfg), DataError);
}

TEST(ToyText, DistinctTokensAreNearlyOrthogonal) {
  ToyTextEncoderConfig cfg{64, 1};
  const auto words = synthlab::pseudo_words(40, 2);
  std::string text;
  for (const auto& w : words) text += w + " ";
  const auto t = toy_text_encode(text, cfg);
  double mean_abs = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < t.rows(); ++a) {
    for (std::size_t b = a + 1; b < t.rows(); ++b) {
      double c = 0;
      for (std::size_t j = 0; j < 64; ++j) c += t.at(a, j) * t.at(b, j);
      mean_abs += std::abs(c);
      ++pairs;
    }
  }
  EXPECT_LT(mean_abs / static_cast<double>(pairs), 0.2);
}

namespace {

audio::AudioClip tone(double f0, double amplitude) {
  return synthlab::synthesize_clip({f0, amplitude}, 0.5, 16000.0, 30.0, 77);
}

}  // namespace

TEST(ToyAudio, StepsAreWindowsOfFrames) {
  acoustic::AcousticConfig ac;
  ToyAudioEncoderConfig cfg{8, 20, 1};
  const auto clip = tone(180, 0.2);
  const auto frames = acoustic::frame_count(clip.samples.size(), ac);
  const auto t = toy_audio_encode(clip, ac, cfg);
  EXPECT_EQ(t.rows(), frames / 20);
  EXPECT_EQ(t.cols(), 8u);
  EXPECT_EQ(toy_audio_encode(clip, ac, cfg).data, t.data);
  audio::AudioClip tiny{std::vector<double>(500, 0.1), 16000.0};
  EXPECT_THROW(toy_audio_encode(tiny, ac, cfg), DataError);
}

TEST(ToyAudio, AmplitudeOnlyMovesColumnZero) {
  acoustic::AcousticConfig ac;
  ToyAudioEncoderConfig cfg{6, 25, 2};
  auto quiet = tone(200, 0.1);
  auto loud = quiet;
  for (auto& s : loud.samples) s *= 2.0;
  const auto a = toy_audio_encode(quiet, ac, cfg);
  const auto b = toy_audio_encode(loud, ac, cfg);
  ASSERT_EQ(a.shape, b.shape);
  for (std::size_t t = 0; t < a.rows(); ++t) {
    EXPECT_GT(b.at(t, 0), a.at(t, 0));
    for (std::size_t j = 1; j < 6; ++j) EXPECT_NEAR(a.at(t, j), b.at(t, j), 1e-6);
  }
}

TEST(ToyAudio, PitchMovesOtherColumns) {
  acoustic::AcousticConfig ac;
  ToyAudioEncoderConfig cfg{6, 25, 2};
  const auto a = toy_audio_encode(tone(130, 0.2), ac, cfg);
  const auto b = toy_audio_encode(tone(290, 0.2), ac, cfg);
  double diff = 0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    for (std::size_t j = 1; j < 6; ++j) diff += std::abs(a.at(t, j) - b.at(t, j));
  }
  EXPECT_GT(diff, 0.1);
}

TEST(Align, ReportsBothDirections) {
  const auto c = corpus::Corpus::from_records({record("u1", "a.wav"), record("u2", std::nullopt), record("u3", "a.wav")});
  auto s = sample_store();
  s.insert("zz", Tensor::matrix(1, 3, {0, 0, 0}));
  const auto r = align(c, s);
  EXPECT_EQ(r.missing_from_store, (std::vector<std::string>{"u3"}));
  EXPECT_EQ(r.absent_from_corpus, (std::vector<std::string>{"zz"}));
  EXPECT_FALSE(r.complete());

  EmbeddingStore au(Modality::Audio, 1, "");
  au.insert("a.wav", Tensor::matrix(1, 1, {1}));
  const auto ra = align(c, au, AlignKey::AudioRef);
  EXPECT_EQ(ra.missing_from_store, (std::vector<std::string>{"u2"}));
  EXPECT_TRUE(ra.absent_from_corpus.empty());
}

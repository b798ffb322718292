#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "cpsfuse/error.hpp"
#include "cpsfuse/rng.hpp"
#include "cpsfuse/tfidf.hpp"

using namespace cpsfuse;
using namespace cpsfuse::classical;

TEST(Tokenize, LowercaseWordRuns) {
  EXPECT_EQ(tokenize("We'll SOLVE it_2, a b"), (std::vector<std::string>{"we", "ll", "solve", "it_2"}));
}

TEST(Stopwords, ShippedListAndParser) {
  const auto& s = english_stopwords();
  EXPECT_TRUE(s.contains("the"));
  EXPECT_TRUE(s.contains("we"));
  EXPECT_FALSE(s.contains("triangle"));
  EXPECT_EQ(kStopwordsVersion, "en_v1");
  const auto p = parse_stopwords("# comment\nfoo\n\n  bar  \n");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_TRUE(p.contains("bar"));
}

TEST(FitTfidf, HandFormulaIdf) {
  const auto m = fit_tfidf({"we solve it", "we check"}, StopwordSet{});
  EXPECT_DOUBLE_EQ(m.idf()[static_cast<std::size_t>(m.index_of("we"))], 1.0);
  EXPECT_NEAR(m.idf()[static_cast<std::size_t>(m.index_of("solve"))], std::log(1.5) + 1.0, 1e-15);
  EXPECT_EQ(m.index_of("nothere"), -1);
}

TEST(FitTfidf, StopwordsExcludedAndVocabularySorted) {
  const auto m = fit_tfidf({"the triangle", "the angle"}, english_stopwords());
  EXPECT_EQ(m.index_of("the"), -1);
  EXPECT_EQ(m.vocabulary(), (std::vector<std::string>{"angle", "triangle"}));
  EXPECT_THROW(fit_tfidf({"the a of", ""}, english_stopwords()), DataError);
}

TEST(FitTfidf, IdfMonotoneInDocumentFrequency) {
  const auto m = fit_tfidf({"aa bb cc", "aa bb", "aa", "dd"}, StopwordSet{});
  auto idf = [&](const char* t) { return m.idf()[static_cast<std::size_t>(m.index_of(t))]; };
  EXPECT_GT(idf("cc"), idf("bb"));
  EXPECT_GT(idf("bb"), idf("aa"));
  for (double v : m.idf()) EXPECT_GE(v, 1.0);
}

TEST(TransformTfidf, NormIsZeroOrOne) {
  const auto m = fit_tfidf({"alpha beta gamma", "beta delta", "gamma gamma epsilon"}, StopwordSet{});
  EXPECT_TRUE(transform_tfidf(m, "unseen words only").entries.empty());
  const auto one = transform_tfidf(m, "delta");
  ASSERT_EQ(one.entries.size(), 1u);
  EXPECT_EQ(one.entries[0].first, static_cast<std::uint32_t>(m.index_of("delta")));
  EXPECT_NEAR(one.entries[0].second, 1.0, 1e-12);
  Rng rng(1);
  const std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
  for (int i = 0; i < 200; ++i) {
    std::string text;
    for (std::size_t k = 0; k < rng.below(8); ++k) text += words[rng.below(words.size())] + " ";
    const auto v = transform_tfidf(m, text);
    const double n = v.norm();
    EXPECT_TRUE(std::abs(n) < 1e-12 || std::abs(n - 1.0) < 1e-12) << text;
    for (std::size_t k = 1; k < v.entries.size(); ++k) EXPECT_LT(v.entries[k - 1].first, v.entries[k].first);
  }
}

TEST(TransformTfidf, CountsTimesIdf) {
  const auto m = fit_tfidf({"aa bb", "aa"}, StopwordSet{});
  const auto v = transform_tfidf(m, "aa aa bb");
  const double a = 2.0 * 1.0, b = std::log(1.5) + 1.0;
  const double n = std::hypot(a, b);
  EXPECT_NEAR(v.entries[0].second, a / n, 1e-15);
  EXPECT_NEAR(v.entries[1].second, b / n, 1e-15);
}

TEST(TfidfModel, SaveLoadRoundTrip) {
  const auto m = fit_tfidf({"alpha beta", "gamma"}, StopwordSet{});
  binio::Container c;
  m.save(c, "tfidf");
  const auto back = TfidfModel::load(binio::Container::deserialize(c.serialize()), "tfidf");
  EXPECT_EQ(back.vocabulary(), m.vocabulary());
  EXPECT_EQ(back.idf(), m.idf());
}

TEST(ConcatFeatures, ShapeAndZScores) {
  std::vector<acoustic::AcousticFeatureVector> rows(2);
  for (std::size_t i = 0; i < acoustic::kFeatureCount; ++i) {
    rows[0][i] = 1.0;
    rows[1][i] = i == 0 ? 1.0 : 3.0;  // feature 0 has zero spread
  }
  const auto scaler = AudioScaler::fit(rows);
  EXPECT_DOUBLE_EQ(scaler.mean()[1], 2.0);
  EXPECT_DOUBLE_EQ(scaler.stddev()[1], 1.0);
  SparseVector text;
  text.dimension = 100;
  text.entries = {{3, 0.6}, {50, 0.8}};
  acoustic::AcousticFeatureVector probe{};
  probe[0] = 7.0;   // zero-std feature maps to 0
  probe[1] = 2.0;   // equals the mean
  probe[2] = 4.0;   // mean + 2 std
  const auto v = concat_features(text, probe, scaler);
  EXPECT_EQ(v.dimension, 111u);
  std::map<std::uint32_t, double> got(v.entries.begin(), v.entries.end());
  EXPECT_DOUBLE_EQ(got[3], 0.6);
  EXPECT_FALSE(got.contains(100));
  EXPECT_FALSE(got.contains(101));
  EXPECT_DOUBLE_EQ(got[102], 2.0);
  const std::vector<double> short_audio(5, 0.0);
  EXPECT_THROW(concat_features(text, short_audio, scaler), DataError);
}

TEST(AudioScaler, SaveLoadRoundTrip) {
  const AudioScaler s(std::vector<double>(11, 0.5), std::vector<double>(11, 2.0));
  binio::Container c;
  s.save(c, "scaler");
  const auto back = AudioScaler::load(c, "scaler");
  EXPECT_EQ(back.mean(), s.mean());
  EXPECT_EQ(back.stddev(), s.stddev());
}

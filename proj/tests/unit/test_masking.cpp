#include <gtest/gtest.h>

#include "cpsfuse/error.hpp"
#include "cpsfuse/masking.hpp"
#include "cpsfuse/rng.hpp"
#include "oracles.hpp"

using namespace cpsfuse;
using namespace cpsfuse::corpus;

namespace {

MaskLexicon lexicon(std::vector<std::pair<std::string, std::vector<std::string>>> cats) {
  MaskLexicon l;
  for (auto& [c, s] : cats) l.add_category(c, s);
  return l;
}

}  // namespace

TEST(Masking, DirectSubstitution) {
  EXPECT_EQ(mask_text("ask John", lexicon({{"NAME", {"John"}}})), "ask [NAME]");
}

TEST(Masking, LongestMatchWins) {
  EXPECT_EQ(mask_text("New York City", lexicon({{"LOCATION", {"New York City", "York"}}})), "[LOCATION]");
  EXPECT_EQ(mask_text("to York now", lexicon({{"LOCATION", {"New York City", "York"}}})), "to [LOCATION] now");
}

TEST(Masking, CaseInsensitiveAndWordBounded) {
  const auto l = lexicon({{"NAME", {"ann"}}});
  EXPECT_EQ(mask_text("ANN and Anna", l), "[NAME] and Anna");
  EXPECT_EQ(mask_text("planned", l), "planned");
  EXPECT_EQ(mask_text("ann, ok", l), "[NAME], ok");
}

TEST(Masking, EmptyLexiconIsIdentity) {
  const auto l = MaskLexicon::default_categories();
  EXPECT_TRUE(l.empty());
  EXPECT_EQ(l.categories().size(), 11u);
  EXPECT_EQ(mask_text("ask John", l), "ask John");
}

TEST(Masking, RejectsInvalidLexicons) {
  MaskLexicon l;
  l.add_category("NAME", {"x"});
  EXPECT_THROW(l.add_category("NAME", {"y"}), Error);
  EXPECT_THROW(l.add_category("name", {"y"}), Error);
  EXPECT_THROW(l.add_category("APP", {""}), Error);
  EXPECT_THROW(l.add_category("GAME", {"[x]"}), Error);
}

TEST(Masking, IdempotentOnRandomText) {
  const auto l = lexicon({{"NAME", {"bo", "bo ka", "ka"}}, {"SCHOOL", {"ka mi", "mi"}}, {"APP", {"zu"}}});
  const std::vector<std::string> words{"bo", "ka", "mi", "zu", "xo", "BO", "Ka", "bokami"};
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) text += (i ? " " : "") + words[rng.below(words.size())];
    const auto once = mask_text(text, l);
    EXPECT_EQ(mask_text(once, l), once) << text;
  }
}

TEST(Masking, ApplyMasksWithOverrides) {
  Record a;
  a.utterance = {"u1", "T", "P", 0, 10, "ask John", std::nullopt};
  Record b;
  b.utterance = {"u2", "T", "P", 0, 10, "ask Mary", std::nullopt};
  const auto c = Corpus::from_records({a, b});
  const auto out = apply_masks(c, lexicon({{"NAME", {"John"}}}), {{"u2", "ask Mary please"}});
  EXPECT_EQ(out.records()[0].utterance.text, "ask [NAME]");
  EXPECT_EQ(out.records()[1].utterance.text, "ask Mary please");
  const auto twice = apply_masks(out, lexicon({{"NAME", {"John"}}}));
  EXPECT_EQ(twice.records()[0].utterance.text, "ask [NAME]");
}

TEST(Masking, LexiconAndOverrideFiles) {
  oracle::TempDir dir("mask");
  oracle::write_text(dir / "lex.json", R"({"NAME": ["John", "Mary Ann"], "APP": ["Minecraft"]})");
  oracle::write_text(dir / "over.json", R"({"u1": "fixed text"})");
  const auto l = load_mask_lexicon(dir / "lex.json");
  EXPECT_EQ(mask_text("Mary Ann plays Minecraft", l), "[NAME] plays [APP]");
  const auto o = load_mask_overrides(dir / "over.json");
  EXPECT_EQ(o.at("u1"), "fixed text");
  oracle::write_text(dir / "bad.json", R"(["NAME"])");
  EXPECT_THROW(load_mask_lexicon(dir / "bad.json"), DataError);
}

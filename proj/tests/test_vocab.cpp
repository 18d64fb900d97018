// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "detox/corpus.hpp"
#include "detox/vocab.hpp"
#include "test_support.hpp"

namespace detox {
namespace {

std::vector<LabeledExample> examples(std::initializer_list<const char*> texts) {
  std::vector<LabeledExample> out;
  for (const char* t : texts) out.push_back({t, "hate", "test"});
  return out;
}

TEST(Tokenize, EmptyTextGivesEmptySequence) {
  Vocabulary vocab({"a"});
  EXPECT_TRUE(tokenize("", vocab).empty());
}

TEST(Tokenize, UnknownMapsToUnk) {
  Vocabulary vocab({"aardvark"});
  const auto seq = tokenize("aardvark zzz", vocab);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq.ids[0], *vocab.find("aardvark"));
  EXPECT_EQ(seq.ids[1], vocab.unk_id());
}

TEST(Tokenize, InVocabularyTextHasNoUnk) {
  const auto corpus = examples({"The cat sat, on the mat."});
  const auto vocab = build_vocabulary(corpus);
  for (TokenId id : tokenize(corpus[0].text, vocab).ids) EXPECT_NE(id, vocab.unk_id());
}

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(split_tokens("Hello,World!  ok"), (std::vector<std::string>{"hello", ",", "world", "!", "ok"}));
}

TEST(Tokenize, DetokenizeRoundTrip) {
  const auto corpus = examples({"you are a Kind person ."});
  const auto vocab = build_vocabulary(corpus);
  EXPECT_EQ(detokenize(tokenize(corpus[0].text, vocab).ids, vocab), "you are a kind person .");
}

TEST(Vocabulary, SpecialsOccupyFirstIds) {
  Vocabulary vocab({"x"});
  EXPECT_EQ(vocab.token(vocab.unk_id()), "<unk>");
  EXPECT_EQ(vocab.token(vocab.bos_id()), "<s>");
  EXPECT_EQ(vocab.token(vocab.eos_id()), "</s>");
  EXPECT_EQ(*vocab.find("x"), 3);
}

TEST(BuildVocabulary, MinCountTwo) {
  const auto vocab = build_vocabulary(examples({"a a b"}), 2);
  EXPECT_EQ(vocab.size(), 4u);
  EXPECT_TRUE(vocab.find("a"));
  EXPECT_FALSE(vocab.find("b"));
}

TEST(BuildVocabulary, MinCountOne) {
  const auto vocab = build_vocabulary(examples({"a a b"}), 1);
  EXPECT_EQ(vocab.size(), 5u);
  EXPECT_EQ(*vocab.find("a"), 3);
  EXPECT_EQ(*vocab.find("b"), 4);
}

TEST(BuildVocabulary, TiesBreakLexicographically) {
  const auto vocab = build_vocabulary(examples({"c b a"}));
  EXPECT_EQ(vocab.tokens(), (std::vector<std::string>{"<unk>", "<s>", "</s>", "a", "b", "c"}));
}

TEST(BuildVocabulary, Errors) {
  EXPECT_THROW(build_vocabulary(examples({"a"}), 0), std::invalid_argument);
  EXPECT_THROW(build_vocabulary(std::vector<LabeledExample>{}), std::invalid_argument);
}

TEST(BuildVocabulary, Deterministic) {
  const auto corpus = examples({"x y z x", "z z q"});
  EXPECT_EQ(build_vocabulary(corpus), build_vocabulary(corpus));
  EXPECT_EQ(build_vocabulary(corpus).hash(), build_vocabulary(corpus).hash());
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  testing::TempDir dir;
  const auto vocab = build_vocabulary(examples({"alpha beta gamma beta"}));
  save_vocabulary(vocab, dir / "v.json");
  const auto loaded = load_vocabulary(dir / "v.json");
  EXPECT_EQ(loaded, vocab);
  EXPECT_EQ(loaded.hash(), vocab.hash());
}

TEST(Vocabulary, HashDependsOnOrder) {
  EXPECT_NE(Vocabulary({"a", "b"}).hash(), Vocabulary({"b", "a"}).hash());
  EXPECT_EQ(Vocabulary({"a", "b"}).hash().size(), 16u);
}

}  // namespace
}  // namespace detox

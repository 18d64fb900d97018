// Copyright 2026 The Detox Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "detox/corpus.hpp"
#include "test_support.hpp"

namespace detox {
namespace {

TEST(LoadLabeledCorpus, KeepSetFilters) {
  testing::TempDir dir;
  testing::write_text(dir / "c.jsonl",
                      "{\"text\":\"one\",\"label\":\"hate\"}\n"
                      "{\"text\":\"two\",\"label\":\"neutral\"}\n"
                      "{\"text\":\"three\",\"label\":\"hate\"}\n");
  const auto out = load_labeled_corpus(dir / "c.jsonl", CorpusFormat::kJsonl, {"hate"});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].text, "one");
  EXPECT_EQ(out[1].text, "three");
}

TEST(LoadLabeledCorpus, EmptyKeepSetKeepsAll) {
  testing::TempDir dir;
  testing::write_text(dir / "c.jsonl",
                      "{\"text\":\"one\",\"label\":\"hate\"}\n{\"text\":\"two\",\"label\":\"neutral\"}\n");
  EXPECT_EQ(load_labeled_corpus(dir / "c.jsonl", CorpusFormat::kJsonl).size(), 2u);
}

TEST(LoadLabeledCorpus, EmptyFile) {
  testing::TempDir dir;
  testing::write_text(dir / "c.jsonl", "");
  EXPECT_TRUE(load_labeled_corpus(dir / "c.jsonl", CorpusFormat::kJsonl).empty());
}

TEST(LoadLabeledCorpus, MalformedLineNamed) {
  testing::TempDir dir;
  testing::write_text(dir / "c.jsonl", "{\"text\":\"one\",\"label\":\"hate\"}\n{not json\n");
  try {
    load_labeled_corpus(dir / "c.jsonl", CorpusFormat::kJsonl);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadLabeledCorpus, TsvAndPlain) {
  testing::TempDir dir;
  testing::write_text(dir / "c.tsv", "hello there\thate\nbye\tother\n");
  const auto tsv = load_labeled_corpus(dir / "c.tsv", CorpusFormat::kTsv, {"hate"});
  ASSERT_EQ(tsv.size(), 1u);
  EXPECT_EQ(tsv[0].text, "hello there");

  testing::write_text(dir / "c.txt", "first line\n\nsecond line\n");
  const auto plain = load_labeled_corpus(dir / "c.txt", CorpusFormat::kPlain, {"hate"});
  ASSERT_EQ(plain.size(), 2u);
  EXPECT_EQ(plain[1].label, "plain");
}

TEST(LoadLabeledCorpus, UnknownFormatTag) { EXPECT_THROW(parse_corpus_format("xml"), std::invalid_argument); }

TEST(LoadPrompts, ChallengingFilter) {
  testing::TempDir dir;
  testing::write_text(dir / "p.jsonl",
                      "{\"text\":\"a\",\"challenging\":true}\n"
                      "{\"text\":\"b\",\"challenging\":false}\n"
                      "{\"text\":\"c\"}\n"
                      "{\"text\":\"d\",\"challenging\":true}\n"
                      "{\"text\":\"e\",\"challenging\":false}\n");
  EXPECT_EQ(load_prompts(dir / "p.jsonl", true).size(), 2u);
  const auto all = load_prompts(dir / "p.jsonl", false);
  ASSERT_EQ(all.size(), 5u);
  EXPECT_FALSE(all[2].challenging);
}

TEST(LoadBBQ, ParsesAndValidates) {
  testing::TempDir dir;
  testing::write_text(dir / "b.jsonl",
                      "{\"context\":\"c\",\"question\":\"q\",\"answers\":[\"x\",\"y\",\"unknown\"],"
                      "\"biased_index\":0,\"unknown_index\":2}\n");
  const auto items = load_bbq_items(dir / "b.jsonl");
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].answers[1], "y");
  BBQItem bad = items[0];
  bad.biased_index = 2;
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

TEST(LoadWinogender, RequiresOneBlank) {
  testing::TempDir dir;
  testing::write_text(dir / "w.jsonl",
                      "{\"template\":\"the nurse said {pronoun} was late\",\"occupation\":\"nurse\","
                      "\"bls_female_pct\":0.9}\n");
  const auto items = load_winogender_items(dir / "w.jsonl");
  ASSERT_EQ(items.size(), 1u);
  WinogenderItem bad = items[0];
  bad.template_text = "no blank here";
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad.template_text = "{pronoun} and {pronoun}";
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

TEST(WriteCorpus, RoundTrip) {
  testing::TempDir dir;
  std::vector<LabeledExample> in = {{"some \"quoted\" text", "hate", ""}, {"plain", "offensive", ""}};
  write_labeled_corpus(dir / "c.jsonl", in);
  const auto out = load_labeled_corpus(dir / "c.jsonl", CorpusFormat::kJsonl);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].text, in[0].text);
  EXPECT_EQ(out[1].label, "offensive");
}

}  // namespace
}  // namespace detox

// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "counterrank/textrep.hpp"

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace counterrank {
namespace {

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Ban smoking!"), (TokenSeq{"ban", "smoking"}));
  EXPECT_EQ(tokenize(""), TokenSeq{});
  EXPECT_EQ(tokenize("COVID-19 rules"), (TokenSeq{"covid", "19", "rules"}));
  EXPECT_EQ(tokenize("  it's  a\ttest.\n"), (TokenSeq{"it", "s", "a", "test"}));
}

TEST(Tokenize, NonAscii) {
  EXPECT_EQ(tokenize("Über café—naïve"), (TokenSeq{"über", "café", "naïve"}));
  EXPECT_EQ(tokenize("ПРИВЕТ мир"), (TokenSeq{"привет", "мир"}));
  EXPECT_EQ(tokenize("a\xff" "b"), (TokenSeq{"a", "b"}));  // invalid byte separates
}

TEST(Tokenize, NoWhitespaceInTokens) {
  for (const auto& t : tokenize("one, two;three four  five\r\nsix"))
    EXPECT_EQ(t.find_first_of(" \t\r\n"), std::string::npos);
}

TEST(TermFrequency, Examples) {
  TfVector tf = term_frequency({"ban", "smoking", "ban"});
  ASSERT_EQ(tf.entries.size(), 2u);
  EXPECT_DOUBLE_EQ(tf.weight("ban"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(tf.weight("smoking"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(tf.weight("cars"), 0.0);
  EXPECT_DOUBLE_EQ(term_frequency({"a"}).weight("a"), 1.0);
  EXPECT_THROW(term_frequency({}), Error);
}

TEST(TermFrequency, SumsToOneAndIsRepetitionInvariant) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq s;
    const int len = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng() % 12));
    TfVector tf = term_frequency(s);
    double sum = 0.0;
    for (const auto& [_, w] : tf.entries) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    TokenSeq doubled = s;
    doubled.insert(doubled.end(), s.begin(), s.end());
    TfVector tf2 = term_frequency(doubled);
    ASSERT_EQ(tf2.entries.size(), tf.entries.size());
    for (std::size_t k = 0; k < tf.entries.size(); ++k)
      EXPECT_NEAR(tf2.entries[k].second, tf.entries[k].second, 1e-15);
  }
}

EmbeddingStore small_store() {
  EmbeddingStore s(4);
  s.add("ban", {1.0f, 0.0f, 0.5f, -2.0f});
  s.add("smoking", {0.0f, 1.0f, 0.25f, 3.5f});
  return s;
}

TEST(EmbeddingStore, HeaderEcho) {
  testing::TempDir dir;
  small_store().save(dir.file("s.emb"));
  EmbeddingStore s = load_embedding_store(dir.file("s.emb"));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.dim(), 4u);
  EXPECT_EQ(s.keys(), (std::vector<std::string>{"ban", "smoking"}));
}

TEST(EmbeddingStore, RoundTripIsBitExact) {
  std::mt19937 rng(3);
  std::normal_distribution<float> normal(0.0f, 10.0f);
  EmbeddingStore s(7);
  for (int k = 0; k < 50; ++k) {
    std::vector<float> v(7);
    for (auto& x : v) x = normal(rng);
    if (k == 0) v[0] = -0.0f;
    s.add("key" + std::to_string(k) + "\xc3\xa9", v);
  }
  EmbeddingStore back = EmbeddingStore::deserialize(s.serialize());
  ASSERT_EQ(back.size(), s.size());
  for (const auto& key : s.keys()) {
    const auto* a = s.find(key);
    const auto* b = back.find(key);
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(std::memcmp(a->data(), b->data(), a->size() * sizeof(float)), 0);
  }
  EXPECT_EQ(back.serialize(), s.serialize());
}

TEST(EmbeddingStore, Errors) {
  std::string bytes = small_store().serialize();
  try {
    EmbeddingStore::deserialize(bytes.substr(0, bytes.size() - 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "truncated store");
  }
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(EmbeddingStore::deserialize(bad), Error);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(EmbeddingStore::deserialize(bad_version), Error);

  // Duplicate key: two records both named "ban".
  std::string dup = "EMBS";
  bin::put<std::uint32_t>(dup, 1);
  bin::put<std::uint32_t>(dup, 1);
  bin::put<std::uint64_t>(dup, 2);
  for (int k = 0; k < 2; ++k) {
    bin::put_key(dup, "ban");
    bin::put<float>(dup, 1.0f);
  }
  EXPECT_THROW(EmbeddingStore::deserialize(dup), Error);

  EmbeddingStore s(2);
  EXPECT_THROW(s.add("x", {1.0f}), Error);
}

TEST(WordVectorsText, ParsesAndValidates) {
  EmbeddingStore s = parse_word_vectors_text("2 3\nban 1 2 3\nsmoking 0.5 -1 2e-3\n");
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.dim(), 3u);
  EXPECT_FLOAT_EQ((*s.find("smoking"))[2], 2e-3f);

  try {
    parse_word_vectors_text("a 1 2\nb 1 2\nc 1 2 3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(parse_word_vectors_text("a 1 2\na 3 4\n"), Error);
  EXPECT_THROW(parse_word_vectors_text("a 1 x\n"), Error);
}

TEST(DocEmbeddingBag, AllInVocabularyMatchesTf) {
  EmbeddingStore s = small_store();
  TokenSeq toks{"ban", "smoking", "ban"};
  EmbeddingBag bag = doc_embedding_bag(toks, s);
  TfVector tf = term_frequency(toks);
  ASSERT_EQ(bag.size(), 2u);
  for (const auto& e : bag) EXPECT_DOUBLE_EQ(e.weight, tf.weight(e.token));
  EXPECT_EQ(bag[0].vec.data(), s.find("ban")->data());
}

TEST(DocEmbeddingBag, OovHandling) {
  EmbeddingStore s = small_store();
  EXPECT_TRUE(doc_embedding_bag({"zzz", "qqq"}, s).empty());
  EXPECT_TRUE(doc_embedding_bag({}, s).empty());
  EmbeddingBag bag = doc_embedding_bag({"ban", "zzz", "smoking"}, s);
  ASSERT_EQ(bag.size(), 2u);
  EXPECT_DOUBLE_EQ(bag[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(bag[1].weight, 0.5);
}

TEST(DocEmbeddingBag, WeightsSumToOne) {
  std::mt19937 rng(5);
  EmbeddingStore s(2);
  for (int k = 0; k < 10; ++k) s.add("w" + std::to_string(k), {1.0f, float(k)});
  for (int trial = 0; trial < 100; ++trial) {
    TokenSeq t;
    for (int i = 0; i < 25; ++i) t.push_back("w" + std::to_string(rng() % 15));
    EmbeddingBag bag = doc_embedding_bag(t, s);
    if (bag.empty()) continue;
    double sum = 0.0;
    for (const auto& e : bag) sum += e.weight;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(DocEmbeddingBag, TruncationKeepsHeaviest) {
  EmbeddingStore s(1);
  TokenSeq t;
  for (int k = 0; k < 5; ++k) {
    s.add("w" + std::to_string(k), {float(k)});
    for (int r = 0; r <= k; ++r) t.push_back("w" + std::to_string(k));
  }
  EmbeddingBag bag = truncate_bag(doc_embedding_bag(t, s), 2);
  ASSERT_EQ(bag.size(), 2u);
  EXPECT_EQ(bag[0].token, "w3");
  EXPECT_EQ(bag[1].token, "w4");
  EXPECT_NEAR(bag[0].weight + bag[1].weight, 1.0, 1e-15);
  EXPECT_NEAR(bag[1].weight, 5.0 / 9.0, 1e-15);
}

}  // namespace
}  // namespace counterrank

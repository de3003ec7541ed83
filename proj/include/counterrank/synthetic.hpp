// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "counterrank/common.hpp"
#include "counterrank/corpus.hpp"
#include "counterrank/textrep.hpp"

namespace counterrank {

// Synthetic debates with a known answer. Each debate holds a point whose gold
// counter repeats most of the point's aspect tokens with the opposite stance,
// next to distractors that are either similar with the same stance or share
// only the topic.
struct SyntheticSpec {
  std::size_t n_debates = 200;
  std::size_t n_themes = 5;
  std::size_t n_aspects = 6;          // aspect tokens per argument
  std::size_t n_paraphrases = 1;      // same aspects, same stance
  std::size_t n_cross_aspect = 2;     // other aspects, opposite stance
  std::size_t n_random = 1;
  std::size_t aspect_vocab = 60;
  std::size_t stance_vocab = 10;      // per side
  std::size_t filler_vocab = 40;
  std::size_t topic_vocab = 40;
  std::size_t topic_tokens = 3;
  std::size_t stance_tokens = 3;
  std::uint64_t seed = 1;
};

enum class SyntheticRole { kPoint, kGold, kParaphrase, kCrossAspect, kRandom };

inline std::string_view to_string(SyntheticRole r) {
  switch (r) {
    case SyntheticRole::kPoint: return "point";
    case SyntheticRole::kGold: return "gold";
    case SyntheticRole::kParaphrase: return "paraphrase";
    case SyntheticRole::kCrossAspect: return "cross_aspect";
    case SyntheticRole::kRandom: return "random";
  }
  return "?";
}

struct SyntheticCorpus {
  Corpus corpus;
  std::unordered_map<std::string, SyntheticRole> roles;
};

// Number of the point's aspect tokens the gold keeps: at least 80%.
inline std::size_t gold_aspect_overlap(std::size_t n_aspects) {
  return static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n_aspects) - 1e-9));
}

inline void validate(const SyntheticSpec& s) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("inconsistent synthetic spec: ") + what);
  };
  need(s.n_themes >= 1, "n_themes must be at least 1");
  need(s.n_aspects >= 1, "n_aspects must be at least 1");
  need(s.aspect_vocab >= 2 * s.n_aspects, "aspect_vocab must be at least 2 * n_aspects");
  need(s.stance_tokens >= 1 && s.stance_vocab >= s.stance_tokens, "stance_vocab must cover stance_tokens >= 1");
  need(s.topic_tokens >= 1 && s.topic_vocab >= s.topic_tokens, "topic_vocab must cover topic_tokens >= 1");
  need(s.filler_vocab >= 1, "filler_vocab must be at least 1");
}

namespace detail {

inline std::vector<std::string> draw_tokens(const std::string& prefix, std::size_t vocab, std::size_t n, Rng& rng,
                                            const std::vector<std::size_t>& exclude = {}) {
  std::vector<std::size_t> avail;
  for (std::size_t i = 0; i < vocab; ++i)
    if (std::find(exclude.begin(), exclude.end(), i) == exclude.end()) avail.push_back(i);
  std::vector<std::string> out;
  for (std::size_t k : sample_without_replacement(avail.size(), n, rng)) out.push_back(prefix + std::to_string(avail[k]));
  return out;
}

inline std::string join_shuffled(std::vector<std::string> tokens, Rng& rng) {
  std::shuffle(tokens.begin(), tokens.end(), rng);
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace detail

// The point's stance is drawn per debate so that stance words alone never
// identify the gold.
inline SyntheticCorpus generate_synthetic_with_roles(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const std::size_t n = spec.n_aspects;
  std::vector<Argument> args;
  std::unordered_map<std::string, SyntheticRole> roles;

  for (std::size_t d = 0; d < spec.n_debates; ++d) {
    const Stance side = (rng() & 1) ? Stance::kPro : Stance::kCon;
    const std::string mine = side == Stance::kPro ? "pro" : "con";
    const std::string theirs = side == Stance::kPro ? "con" : "pro";
    auto stance_words = [&](const std::string& prefix) {
      return detail::draw_tokens(prefix, spec.stance_vocab, spec.stance_tokens, rng);
    };

    const auto topic = detail::draw_tokens("top", spec.topic_vocab, spec.topic_tokens, rng);
    std::vector<std::size_t> aspect_ids;
    for (std::size_t k : sample_without_replacement(spec.aspect_vocab, n, rng)) aspect_ids.push_back(k);
    std::vector<std::string> aspects;
    for (std::size_t k : aspect_ids) aspects.push_back("asp" + std::to_string(k));

    struct Draft {
      SyntheticRole role;
      Stance stance;
      std::vector<std::string> conclusion, premise;
    };
    std::vector<Draft> drafts;

    const auto point_stance = stance_words(mine);
    drafts.push_back({SyntheticRole::kPoint, side, detail::concat(topic, point_stance),
                      detail::concat(aspects, point_stance)});

    {
      const std::size_t keep = gold_aspect_overlap(n);
      std::vector<std::string> gold_aspects;
      for (std::size_t k : sample_without_replacement(n, keep, rng)) gold_aspects.push_back(aspects[k]);
      for (auto& t : detail::draw_tokens("asp", spec.aspect_vocab, n - keep, rng, aspect_ids)) gold_aspects.push_back(t);
      const auto s = stance_words(theirs);
      drafts.push_back({SyntheticRole::kGold, opposite(side), detail::concat(topic, s), detail::concat(gold_aspects, s)});
    }
    for (std::size_t k = 0; k < spec.n_paraphrases; ++k) {
      const auto fill = detail::draw_tokens("fil", spec.filler_vocab, std::min(spec.topic_tokens, spec.filler_vocab), rng);
      drafts.push_back({SyntheticRole::kParaphrase, side, detail::concat(fill, point_stance),
                        detail::concat(aspects, point_stance)});
    }
    for (std::size_t k = 0; k < spec.n_cross_aspect; ++k) {
      const auto other = detail::draw_tokens("asp", spec.aspect_vocab, n, rng, aspect_ids);
      const auto s = stance_words(theirs);
      drafts.push_back({SyntheticRole::kCrossAspect, opposite(side), detail::concat(topic, s), detail::concat(other, s)});
    }
    for (std::size_t k = 0; k < spec.n_random; ++k) {
      const bool pro = rng() & 1;
      const auto s = stance_words(pro ? "pro" : "con");
      const auto fill = detail::draw_tokens("fil", spec.filler_vocab, std::min(spec.topic_tokens, spec.filler_vocab), rng);
      const auto asp = detail::draw_tokens("asp", spec.aspect_vocab, n, rng);
      drafts.push_back({SyntheticRole::kRandom, pro ? Stance::kPro : Stance::kCon, detail::concat(fill, s),
                        detail::concat(asp, s)});
    }

    // Argument ids carry no role information.
    std::vector<std::size_t> slot(drafts.size());
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] = i;
    std::shuffle(slot.begin(), slot.end(), rng);
    char debate_id[32];
    std::snprintf(debate_id, sizeof debate_id, "syn%04zu", d);
    auto id_of = [&](std::size_t i) { return std::string(debate_id) + "-a" + std::to_string(slot[i]); };

    const std::string topic_text = "topic " + detail::join_shuffled(topic, rng);
    const std::size_t first = args.size();
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      Argument a;
      a.id = id_of(i);
      a.debate_id = debate_id;
      a.theme = "theme" + std::to_string(d % spec.n_themes);
      a.topic = topic_text;
      a.stance = drafts[i].stance;
      a.conclusion = detail::join_shuffled(drafts[i].conclusion, rng);
      a.premise = detail::join_shuffled(drafts[i].premise, rng);
      if (drafts[i].role == SyntheticRole::kPoint) a.counter_id = id_of(1);
      roles.emplace(a.id, drafts[i].role);
      args.push_back(std::move(a));
    }
    // Store in slot order so corpus position says nothing about role.
    std::sort(args.begin() + static_cast<std::ptrdiff_t>(first), args.end(),
              [](const Argument& x, const Argument& y) { return x.id < y.id; });
  }
  return SyntheticCorpus{args.empty() ? Corpus() : Corpus(std::move(args)), std::move(roles)};
}

inline Corpus generate_synthetic(const SyntheticSpec& spec) { return generate_synthetic_with_roles(spec).corpus; }

// Word vectors seeded by token hash, so a token's vector does not depend on
// which corpus it came from, plus mean-of-words document vectors under
// "doc:<id>", "doc:<id>:cl" and "doc:<id>:pr".
inline EmbeddingStore make_synthetic_store(const Corpus& corpus, std::uint32_t dim = 16, std::uint64_t seed = 1) {
  EmbeddingStore store(dim);
  std::unordered_map<std::string, std::vector<float>> words;
  auto vec_of = [&](const std::string& tok) -> const std::vector<float>& {
    auto it = words.find(tok);
    if (it != words.end()) return it->second;
    Rng rng(fnv1a64(tok) ^ seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(g(rng));
    return words.emplace(tok, std::move(v)).first->second;
  };
  auto mean_of = [&](const std::string& text) {
    std::vector<double> acc(dim, 0.0);
    const TokenSeq toks = tokenize(text);
    for (const auto& t : toks) {
      const auto& v = vec_of(t);
      for (std::uint32_t i = 0; i < dim; ++i) acc[i] += v[i];
    }
    std::vector<float> out(dim, 0.0f);
    if (!toks.empty())
      for (std::uint32_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(toks.size()));
    return out;
  };
  std::vector<std::pair<std::string, std::vector<float>>> docs;
  for (const auto& a : corpus.arguments()) {
    docs.emplace_back(doc_key(a.id), mean_of(a.full_text()));
    docs.emplace_back(doc_key(a.id) + ":cl", mean_of(a.conclusion));
    docs.emplace_back(doc_key(a.id) + ":pr", mean_of(a.premise));
  }
  std::vector<std::string> tokens;
  for (const auto& [t, v] : words) tokens.push_back(t);
  std::sort(tokens.begin(), tokens.end());
  for (const auto& t : tokens) store.add(t, words.at(t));
  for (auto& [k, v] : docs) store.add(k, std::move(v));
  return store;
}

}  // namespace counterrank

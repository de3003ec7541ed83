// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterrank/common.hpp"
#include "counterrank/corpus.hpp"
#include "counterrank/features.hpp"
#include "counterrank/ltr.hpp"
#include "counterrank/neural.hpp"
#include "counterrank/rank.hpp"
#include "counterrank/ranked_list.hpp"
#include "counterrank/simdis.hpp"
#include "counterrank/simplesd.hpp"
#include "counterrank/synthetic.hpp"

namespace counterrank {

// Fraction of points whose first-ranked candidate is the gold. An empty
// ranking counts as a miss.
inline double accuracy_at_1(const std::map<std::string, RankedList>& rankings,
                            const std::map<std::string, std::string>& gold) {
  if (rankings.empty()) throw Error("no rankings to evaluate");
  std::size_t correct = 0;
  for (const auto& [point, list] : rankings) {
    auto g = gold.find(point);
    if (g == gold.end()) throw Error("no gold counter for point " + point);
    if (!list.empty() && list.front().id == g->second) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rankings.size());
}

struct EvalCell {
  Setting setting = Setting::kEpa;
  std::size_t k = 0;
  std::size_t evaluated = 0;
  std::size_t correct = 0;

  double accuracy() const {
    return evaluated == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(evaluated);
  }
};

struct EvalReport {
  std::string model;
  std::string model_fingerprint;
  std::string config_fingerprint;
  // True when the ranking does not depend on K; such models get one row.
  bool k_independent = false;
  std::vector<EvalCell> cells;

  const EvalCell* find(Setting s, std::size_t k) const {
    for (const auto& c : cells)
      if (c.setting == s && (k_independent || c.k == k)) return &c;
    return nullptr;
  }
};

// Ranks the candidate pool of the point at a corpus position; K is the
// shortlist size for two-stage rankers and ignored otherwise.
using PointRanker = std::function<RankedList(std::size_t point, Setting setting, std::size_t k)>;

inline EvalCell evaluate_cell(const Corpus& corpus, Setting setting, std::size_t k, const PointRanker& ranker) {
  EvalCell cell{setting, k, 0, 0};
  for (std::size_t p : corpus.points()) {
    const RankedList list = ranker(p, setting, k);
    ++cell.evaluated;
    if (!list.empty() && list.front().id == *corpus[p].counter_id) ++cell.correct;
  }
  return cell;
}

inline EvalReport evaluate_ranker(std::string name, const Corpus& corpus, std::span<const Setting> settings,
                                  std::span<const std::size_t> ks, const PointRanker& ranker, bool k_independent) {
  if (ks.empty()) throw Error("at least one K is required");
  for (std::size_t k : ks)
    if (k < 1) throw Error("K must be at least 1");
  if (corpus.points().empty()) throw Error("corpus has no points with a gold counter");
  EvalReport r;
  r.model = std::move(name);
  r.k_independent = k_independent;
  for (Setting s : settings) {
    if (k_independent) {
      r.cells.push_back(evaluate_cell(corpus, s, ks.front(), ranker));
      continue;
    }
    for (std::size_t k : ks) r.cells.push_back(evaluate_cell(corpus, s, k, ranker));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rankers
// ---------------------------------------------------------------------------

inline PointRanker simplesd_ranker(const CorpusFeaturizer& fz, LinearWeights w) {
  return [&fz, w](std::size_t p, Setting s, std::size_t) { return rank_by_simplesd(fz, p, s, w); };
}

inline PointRanker classifier_ranker(const CorpusFeaturizer& fz, const LtrModel& m) {
  return [&fz, &m](std::size_t p, Setting s, std::size_t) { return rank_by_classifier(m, fz, p, s); };
}

// Ranks by one feature, e.g. the TF-cosine sum; a pure-similarity baseline.
inline PointRanker single_feature_ranker(const CorpusFeaturizer& fz, std::size_t feature) {
  if (feature >= kNumFeatures) throw Error("feature index out of range");
  return [&fz, feature](std::size_t p, Setting s, std::size_t) {
    const Bm25Stats stats = fz.pool_stats(p, s);
    std::vector<RankedEntry> entries;
    for (std::size_t c : candidate_pool(fz.corpus(), p, s))
      entries.push_back({fz.corpus()[c].id, fz.features(p, c, stats)[feature]});
    return make_ranked_list(std::move(entries));
  };
}

// Uniformly random order, reseeded per (point, setting) from `seed`.
inline PointRanker random_ranker(const Corpus& corpus, std::uint64_t seed) {
  return [&corpus, seed](std::size_t p, Setting s, std::size_t) {
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (p + 1)) ^ (static_cast<std::uint64_t>(s) << 56));
    const auto pool = candidate_pool(corpus, p, s);
    RankedList out;
    const auto order = sample_without_replacement(pool.size(), pool.size(), rng);
    for (std::size_t r = 0; r < order.size(); ++r)
      out.push_back({corpus[pool[order[r]]].id, static_cast<double>(order.size() - r)});
    return out;
  };
}

// Neural pipelines over one corpus:
//   retrieval-only models rank the whole pool by retrieval score (K unused);
//   classification-only models rerank a BM25 top-K shortlist;
//   two-headed models retrieve top-K and rerank with the classification head.
class NeuralRanker {
 public:
  NeuralRanker(const NeuralModel& model, const Corpus& corpus) : model_(&model), corpus_(&corpus) {
    tokens_.reserve(corpus.size());
    for (const auto& a : corpus.arguments()) tokens_.push_back(tokenize(a.full_text()));
    if (model.has_retrieval()) cache_ = build_embedding_cache(model, corpus);
  }

  bool k_independent() const { return !model_->has_classification(); }
  const OpCounts& ops() const { return ops_; }

  RankedList operator()(std::size_t p, Setting s, std::size_t k) {
    if (k < 1) throw Error("K must be at least 1");
    if (!model_->has_classification()) {
      const auto rows = pool_rows(*cache_, *corpus_, p, s);
      return retrieve_topk(*cache_, model_->point_retrieval(tokens_[p]), rows, rows.size(),
                           model_->retrieval_metric(), &ops_);
    }
    if (!model_->has_retrieval()) return rerank_texts(*model_, tokens_[p], bm25_shortlist(p, s, k), text_of(), &ops_);
    return retrieve_and_rerank(*model_, *cache_, tokens_[p], pool_rows(*cache_, *corpus_, p, s), k, &ops_);
  }

  // Top-K of the pool by BM25 between full texts, with pool statistics.
  RankedList bm25_shortlist(std::size_t p, Setting s, std::size_t k) const {
    const auto pool = candidate_pool(*corpus_, p, s);
    std::vector<TokenSeq> docs;
    for (std::size_t c : pool) docs.push_back(tokens_[c]);
    const Bm25Stats stats = build_bm25_stats(docs);
    const TermCounts query(tokens_[p]);
    std::vector<RankedEntry> entries;
    for (std::size_t c : pool) entries.push_back({(*corpus_)[c].id, bm25_score(query, TermCounts(tokens_[c]), stats)});
    return top_k(make_ranked_list(std::move(entries)), k);
  }

 private:
  TextLookup text_of() const {
    return [this](const std::string& id) -> const TokenSeq& { return tokens_[corpus_->position(id)]; };
  }

  const NeuralModel* model_;
  const Corpus* corpus_;
  std::vector<TokenSeq> tokens_;
  std::optional<EmbeddingCache> cache_;
  OpCounts ops_;
};

inline EvalReport evaluate(const NeuralModel& model, const Corpus& corpus, std::span<const Setting> settings,
                           std::span<const std::size_t> ks) {
  auto ranker = std::make_shared<NeuralRanker>(model, corpus);
  EvalReport r = evaluate_ranker(
      std::string(to_string(model.variant())), corpus, settings, ks,
      [ranker](std::size_t p, Setting s, std::size_t k) { return (*ranker)(p, s, k); }, ranker->k_independent());
  r.model_fingerprint = hex64(model_fingerprint(model));
  return r;
}

inline EvalReport evaluate(const NeuralModel& model, const Corpus& corpus, Setting setting,
                           std::span<const std::size_t> ks) {
  const Setting one[] = {setting};
  return evaluate(model, corpus, one, ks);
}

inline std::string ltr_fingerprint(const LtrModel& m) { return hex64(fnv1a64(ltr_to_json(m).dump())); }

inline std::string simplesd_fingerprint(const LinearWeights& w) {
  return hex64(fnv1a64(nlohmann::json(std::vector<double>(w.alpha.begin(), w.alpha.end())).dump()));
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

// `generated_at` is the only time-dependent field.
inline nlohmann::ordered_json reports_to_json(std::span<const EvalReport> reports, const std::string& generated_at) {
  nlohmann::ordered_json j;
  j["metadata"]["generated_at"] = generated_at;
  j["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json jr;
    jr["model"] = r.model;
    jr["model_fingerprint"] = r.model_fingerprint;
    jr["config_fingerprint"] = r.config_fingerprint;
    jr["k_independent"] = r.k_independent;
    jr["results"] = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
      nlohmann::ordered_json jc;
      jc["setting"] = std::string(to_string(c.setting));
      if (!r.k_independent) jc["k"] = c.k;
      jc["evaluated"] = c.evaluated;
      jc["correct"] = c.correct;
      jc["accuracy"] = c.accuracy();
      jr["results"].push_back(std::move(jc));
    }
    j["reports"].push_back(std::move(jr));
  }
  return j;
}

// Accuracy@1 in percent; settings as columns, one row per model (and per K
// for shortlist models, labelled "@1/K").
inline std::string format_table(std::span<const EvalReport> reports) {
  std::vector<Setting> settings;
  for (Setting s : kAllSettings)
    for (const auto& r : reports)
      for (const auto& c : r.cells)
        if (c.setting == s && std::find(settings.begin(), settings.end(), s) == settings.end()) settings.push_back(s);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"model"};
  for (Setting s : settings) header.emplace_back(to_string(s));
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::size_t> ks;
    if (r.k_independent) {
      ks.push_back(0);
    } else {
      for (const auto& c : r.cells)
        if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
    }
    for (std::size_t k : ks) {
      std::vector<std::string> row{r.k_independent ? r.model : r.model + " @1/" + std::to_string(k)};
      for (Setting s : settings) {
        const EvalCell* c = r.find(s, k);
        char buf[32];
        if (c) std::snprintf(buf, sizeof buf, "%.2f", 100.0 * c->accuracy());
        row.emplace_back(c ? buf : "-");
      }
      rows.push_back(std::move(row));
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        out += row[i] + std::string(width[i] - row[i].size(), ' ');
      } else {
        out += "  " + std::string(width[i] - row[i].size(), ' ') + row[i];
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace counterrank

// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "counterrank/common.hpp"
#include "counterrank/corpus.hpp"
#include "counterrank/simdis.hpp"
#include "counterrank/textrep.hpp"

namespace counterrank {

inline constexpr std::size_t kNumFeatures = 20;
inline constexpr std::size_t kNumAggs = 4;

// Metric groups, in feature order. Each group contributes min, max, product,
// sum (in that order) of the metric over (conclusion, candidate) and
// (premise, candidate).
enum class MetricGroup { kTfManhattan, kEmbEarthMover, kTfCosine, kBm25, kDocCosine };

inline constexpr std::size_t kNumGroups = 5;

// The first two groups are the ones the fixed-weight scorer was defined on.
inline constexpr std::size_t kPartFeatures = 8;

inline constexpr std::size_t feature_index(MetricGroup g, AggKind a) {
  return static_cast<std::size_t>(g) * kNumAggs + static_cast<std::size_t>(a);
}

using FeatureVector = std::array<double, kNumFeatures>;

// Everything a text contributes to the pair metrics, computed once.
struct PreparedText {
  TokenSeq tokens;
  TfVector tf;
  TermCounts counts;
  EmbeddingBag bag;
  const std::vector<float>* doc_vec = nullptr;
  std::string doc_key;
};

struct PreparedArgument {
  std::string id;
  PreparedText conclusion;
  PreparedText premise;
  PreparedText full;
};

inline PreparedText prepare_text(const std::string& text, const EmbeddingStore& store,
                                 std::string doc_key_primary, const std::string& doc_key_fallback) {
  PreparedText t;
  t.tokens = tokenize(text);
  if (!t.tokens.empty()) t.tf = term_frequency(t.tokens);
  t.counts = TermCounts(t.tokens);
  t.bag = doc_embedding_bag(t.tokens, store);
  t.doc_vec = store.find(doc_key_primary);
  t.doc_key = std::move(doc_key_primary);
  if (t.doc_vec == nullptr && !doc_key_fallback.empty()) {
    t.doc_vec = store.find(doc_key_fallback);
    if (t.doc_vec != nullptr) t.doc_key = doc_key_fallback;
  }
  return t;
}

// Document vectors are looked up as "doc:<id>" for the whole argument; the
// point-side parts use "doc:<id>:cl" / "doc:<id>:pr" when present and fall
// back to the whole-argument vector otherwise.
inline PreparedArgument prepare_argument(const Argument& a, const EmbeddingStore& store) {
  const std::string whole = doc_key(a.id);
  PreparedArgument p;
  p.id = a.id;
  p.conclusion = prepare_text(a.conclusion, store, whole + ":cl", whole);
  p.premise = prepare_text(a.premise, store, whole + ":pr", whole);
  p.full = prepare_text(a.full_text(), store, whole, "");
  return p;
}

namespace detail {

inline const std::vector<float>& require_doc_vec(const PreparedText& t, const std::string& id) {
  if (t.doc_vec == nullptr) throw Error("missing document embedding for argument " + id +
                                        " (expected key \"" + doc_key(id) + "\")");
  return *t.doc_vec;
}

inline double group_metric(MetricGroup g, const PreparedText& part, const PreparedText& cand,
                           const Bm25Stats& stats, const std::string& point_id,
                           const std::string& cand_id) {
  switch (g) {
    case MetricGroup::kTfManhattan: return manhattan_sim(part.tf, cand.tf);
    case MetricGroup::kEmbEarthMover: return wmd_sim(part.bag, cand.bag);
    case MetricGroup::kTfCosine: return cosine_tf_sim(part.tf, cand.tf);
    case MetricGroup::kBm25: return bm25_score(part.counts, cand.counts, stats);
    case MetricGroup::kDocCosine: {
      const auto& u = require_doc_vec(part, point_id);
      const auto& v = require_doc_vec(cand, cand_id);
      return emb_cosine(std::span<const float>(u), std::span<const float>(v));
    }
  }
  return 0.0;
}

}  // namespace detail

// Pair representation: for each metric group and aggregation, the aggregate
// of metric(conclusion, candidate) and metric(premise, candidate). The
// candidate is always taken whole.
inline FeatureVector extract_features(const PreparedArgument& point,
                                      const PreparedArgument& candidate,
                                      const Bm25Stats& stats) {
  FeatureVector x{};
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    const auto group = static_cast<MetricGroup>(g);
    const double m_cl = detail::group_metric(group, point.conclusion, candidate.full, stats,
                                             point.id, candidate.id);
    const double m_pr = detail::group_metric(group, point.premise, candidate.full, stats,
                                             point.id, candidate.id);
    for (AggKind a : kAllAggKinds) x[feature_index(group, a)] = aggregate(m_cl, m_pr, a);
  }
  return x;
}

struct FeatureContext {
  const EmbeddingStore* store = nullptr;
  Bm25Stats stats;
};

inline FeatureVector extract_features(const Argument& point, const Argument& candidate,
                                      const FeatureContext& ctx) {
  if (ctx.store == nullptr) throw Error("feature context has no embedding store");
  return extract_features(prepare_argument(point, *ctx.store),
                          prepare_argument(candidate, *ctx.store), ctx.stats);
}

// Featurizes pairs within one corpus. Texts are prepared once; BM25 stats
// follow the candidate pool of the requested setting.
class CorpusFeaturizer {
 public:
  CorpusFeaturizer(const Corpus& corpus, const EmbeddingStore& store)
      : corpus_(&corpus), store_(&store) {
    prepared_.reserve(corpus.size());
    for (const auto& a : corpus.arguments()) prepared_.push_back(prepare_argument(a, store));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      all_stats_.add(prepared_[i].full.counts);
      if (corpus.is_counter(i)) counter_stats_.add(prepared_[i].full.counts);
    }
  }

  const Corpus& corpus() const { return *corpus_; }
  const EmbeddingStore& store() const { return *store_; }
  const PreparedArgument& prepared(std::size_t i) const { return prepared_[i]; }

  // Statistics over candidate_pool(corpus, point, setting).
  Bm25Stats pool_stats(std::size_t point, Setting setting) const {
    switch (setting) {
      case Setting::kEpa: {
        Bm25Stats s = all_stats_;
        s.remove(prepared_[point].full.counts);
        return s;
      }
      case Setting::kEpc: {
        Bm25Stats s = counter_stats_;
        if (corpus_->is_counter(point)) s.remove(prepared_[point].full.counts);
        return s;
      }
      default: {
        Bm25Stats s;
        for (std::size_t c : candidate_pool(*corpus_, point, setting)) s.add(prepared_[c].full.counts);
        return s;
      }
    }
  }

  FeatureVector features(std::size_t point, std::size_t candidate, const Bm25Stats& stats) const {
    return extract_features(prepared_[point], prepared_[candidate], stats);
  }

 private:
  const Corpus* corpus_;
  const EmbeddingStore* store_;
  std::vector<PreparedArgument> prepared_;
  Bm25Stats all_stats_;
  Bm25Stats counter_stats_;
};

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct Standardizer {
  FeatureVector mean{};
  FeatureVector std{};

  FeatureVector apply(const FeatureVector& x) const {
    FeatureVector z;
    for (std::size_t i = 0; i < kNumFeatures; ++i) z[i] = (x[i] - mean[i]) / std[i];
    return z;
  }

  FeatureVector invert(const FeatureVector& z) const {
    FeatureVector x;
    for (std::size_t i = 0; i < kNumFeatures; ++i) x[i] = z[i] * std[i] + mean[i];
    return x;
  }
};

// Population mean/std per dimension; near-constant columns get std = 1.
inline Standardizer fit_standardizer(std::span<const FeatureVector> train) {
  if (train.size() < 2) throw Error("fit_standardizer needs at least 2 vectors");
  Standardizer s;
  const double n = static_cast<double>(train.size());
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    double sum = 0.0;
    for (const auto& x : train) sum += x[i];
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& x : train) var += (x[i] - mean) * (x[i] - mean);
    const double sd = std::sqrt(var / n);
    s.mean[i] = mean;
    s.std[i] = sd < 1e-12 ? 1.0 : sd;
  }
  return s;
}

inline FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& x) {
  return s.apply(x);
}

inline nlohmann::ordered_json standardizer_to_json(const Standardizer& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  return j;
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  Standardizer s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  if (mean.size() != kNumFeatures || sd.size() != kNumFeatures)
    throw Error("standardizer must have 20 means and 20 stds");
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (!(sd[i] > 0.0)) throw Error("standardizer std must be positive");
    s.mean[i] = mean[i];
    s.std[i] = sd[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Feature cache file
// ---------------------------------------------------------------------------

// "FEAT", u32 version, u32 dim = 20, then records until EOF:
// [u16 len, point id][u16 len, candidate id][u8 label][20 x f64].
struct FeatureRecord {
  std::string point_id;
  std::string candidate_id;
  std::uint8_t label = 0;
  FeatureVector x{};
};

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

inline std::string serialize_feature_cache(std::span<const FeatureRecord> records) {
  std::string out = "FEAT";
  bin::put<std::uint32_t>(out, kFeatureCacheVersion);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(kNumFeatures));
  for (const auto& r : records) {
    bin::put_key(out, r.point_id);
    bin::put_key(out, r.candidate_id);
    bin::put<std::uint8_t>(out, r.label);
    for (double v : r.x) bin::put<double>(out, v);
  }
  return out;
}

inline std::vector<FeatureRecord> deserialize_feature_cache(std::string_view bytes) {
  bin::Reader r(bytes, "truncated feature cache");
  if (r.get_bytes(4) != "FEAT") throw Error("bad magic: not a feature cache");
  if (r.get<std::uint32_t>() != kFeatureCacheVersion) throw Error("unsupported feature cache version");
  if (r.get<std::uint32_t>() != kNumFeatures) throw Error("feature cache dimension is not 20");
  std::vector<FeatureRecord> out;
  while (!r.done()) {
    FeatureRecord rec;
    rec.point_id = r.get_key();
    rec.candidate_id = r.get_key();
    rec.label = r.get<std::uint8_t>();
    for (auto& v : rec.x) v = r.get<double>();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace counterrank

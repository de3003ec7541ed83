// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "counterrank/common.hpp"
#include "counterrank/corpus.hpp"
#include "counterrank/neural.hpp"
#include "counterrank/ranked_list.hpp"

namespace counterrank {

// Candidate-side embeddings of one model: the base embedding the
// classification head consumes and the retrieval embedding.
struct EmbeddingCache {
  std::size_t d_model = 0;
  std::uint64_t fingerprint = 0;
  std::vector<std::string> ids;
  std::vector<Vec> base;
  std::vector<Vec> retrieval;

  std::size_t size() const { return ids.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void add(std::string id, Vec b, Vec r) {
    if (b.size() != d_model || r.size() != d_model) throw Error("cache vector has the wrong length");
    if (!index_.emplace(id, ids.size()).second) throw Error("duplicate id in embedding cache: " + id);
    ids.push_back(std::move(id));
    base.push_back(std::move(b));
    retrieval.push_back(std::move(r));
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Encodes every argument at the given corpus positions.
inline EmbeddingCache build_embedding_cache(const NeuralModel& model, const Corpus& corpus,
                                            std::span<const std::size_t> positions) {
  if (!model.has_retrieval())
    throw Error(std::string("variant ") + std::string(to_string(model.variant())) + " has no retrieval path");
  EmbeddingCache cache;
  cache.d_model = model.dims().d_model;
  cache.fingerprint = model_fingerprint(model);
  for (std::size_t i : positions) {
    const TokenSeq t = tokenize(corpus[i].full_text());
    cache.add(corpus[i].id, model.candidate_base(t), model.candidate_retrieval(t));
  }
  return cache;
}

inline EmbeddingCache build_embedding_cache(const NeuralModel& model, const Corpus& corpus) {
  std::vector<std::size_t> all(corpus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_embedding_cache(model, corpus, all);
}

// "ECAC", u32 version, u32 d_model, u64 count, then per record
// [u16 len, id][d_model f64 base][d_model f64 retrieval], then u64 fingerprint.
inline constexpr std::uint32_t kCacheVersion = 1;

inline std::string serialize_cache(const EmbeddingCache& c) {
  std::string out = "ECAC";
  bin::put<std::uint32_t>(out, kCacheVersion);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.d_model));
  bin::put<std::uint64_t>(out, c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    bin::put_key(out, c.ids[i]);
    for (double v : c.base[i]) bin::put<double>(out, v);
    for (double v : c.retrieval[i]) bin::put<double>(out, v);
  }
  bin::put<std::uint64_t>(out, c.fingerprint);
  return out;
}

inline EmbeddingCache deserialize_cache(std::string_view bytes) {
  bin::Reader r(bytes, "truncated embedding cache");
  if (r.get_bytes(4) != "ECAC") throw Error("bad magic: not an embedding cache");
  if (r.get<std::uint32_t>() != kCacheVersion) throw Error("unsupported embedding cache version");
  EmbeddingCache c;
  c.d_model = r.get<std::uint32_t>();
  if (c.d_model == 0) throw Error("embedding cache has zero dimension");
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string id = r.get_key();
    Vec b(c.d_model), v(c.d_model);
    for (auto& x : b) x = r.get<double>();
    for (auto& x : v) x = r.get<double>();
    c.add(std::move(id), std::move(b), std::move(v));
  }
  c.fingerprint = r.get<std::uint64_t>();
  if (!r.done()) throw Error("trailing bytes after embedding cache");
  return c;
}

inline void save_cache(const EmbeddingCache& c, const std::string& path) { write_file(path, serialize_cache(c)); }

// Rejects caches produced by a different checkpoint.
inline EmbeddingCache load_cache(const std::string& path, std::uint64_t expected_fingerprint) {
  EmbeddingCache c = deserialize_cache(read_file(path));
  if (c.fingerprint != expected_fingerprint)
    throw Error("stale embedding cache " + path + ": fingerprint " + hex64(c.fingerprint) +
                " does not match model " + hex64(expected_fingerprint));
  return c;
}

// Work done by one query, for cost accounting.
struct OpCounts {
  std::size_t dot_products = 0;
  std::size_t cls_forwards = 0;
};

// Cache rows of a point's candidate pool.
inline std::vector<std::size_t> pool_rows(const EmbeddingCache& cache, const Corpus& corpus,
                                          std::size_t point, Setting setting) {
  std::vector<std::size_t> rows;
  for (std::size_t c : candidate_pool(corpus, point, setting)) {
    auto row = cache.find(corpus[c].id);
    if (!row) throw Error("candidate " + corpus[c].id + " is missing from the embedding cache");
    rows.push_back(*row);
  }
  return rows;
}

// Exact top-K over the given cache rows by retrieval score.
inline RankedList retrieve_topk(const EmbeddingCache& cache, const Vec& point_retrieval,
                                std::span<const std::size_t> rows, std::size_t k,
                                RetrievalMetric metric = RetrievalMetric::kDot, OpCounts* ops = nullptr) {
  if (k < 1) throw Error("K must be at least 1");
  std::vector<RankedEntry> entries;
  entries.reserve(rows.size());
  for (std::size_t r : rows) {
    const Vec& v = cache.retrieval[r];
    const double s = metric == RetrievalMetric::kDot ? dot(point_retrieval, v) : -l2_distance(point_retrieval, v);
    entries.push_back({cache.ids[r], s});
  }
  if (ops) ops->dot_products += rows.size();
  const std::size_t keep = std::min(k, entries.size());
  std::partial_sort(entries.begin(), entries.begin() + keep, entries.end(), ranks_before);
  entries.resize(keep);
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].id == entries[i - 1].id) throw Error("duplicate candidate id " + entries[i].id);
  return entries;
}

inline RankedList retrieve_topk(const EmbeddingCache& cache, const Vec& point_retrieval, std::size_t k,
                                RetrievalMetric metric = RetrievalMetric::kDot, OpCounts* ops = nullptr) {
  std::vector<std::size_t> all(cache.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return retrieve_topk(cache, point_retrieval, all, k, metric, ops);
}

// Reorders a shortlist by classification probability using cached base
// embeddings; nothing is re-encoded.
inline RankedList rerank(const NeuralModel& model, const Vec& point_base, const RankedList& shortlist,
                         const EmbeddingCache& cache, OpCounts* ops = nullptr) {
  if (!model.has_classification() || model.is_cross())
    throw Error(std::string("variant ") + std::string(to_string(model.variant())) +
                " cannot rerank from cached embeddings");
  std::vector<RankedEntry> entries;
  entries.reserve(shortlist.size());
  for (const auto& e : shortlist) {
    auto row = cache.find(e.id);
    if (!row) throw Error("shortlisted candidate " + e.id + " is missing from the embedding cache");
    entries.push_back({e.id, model.classification_prob_base(point_base, cache.base[*row])});
  }
  if (ops) ops->cls_forwards += shortlist.size();
  return make_ranked_list(std::move(entries));
}

using TextLookup = std::function<const TokenSeq&(const std::string&)>;

// Reorders a shortlist by classification probability, encoding texts afresh.
// Works for every model with a classification path, including cross.
inline RankedList rerank_texts(const NeuralModel& model, const TokenSeq& point, const RankedList& shortlist,
                               const TextLookup& text_of, OpCounts* ops = nullptr) {
  std::vector<RankedEntry> entries;
  entries.reserve(shortlist.size());
  for (const auto& e : shortlist) entries.push_back({e.id, model.classification_prob(point, text_of(e.id))});
  if (ops) ops->cls_forwards += shortlist.size();
  return make_ranked_list(std::move(entries));
}

// Retrieval shortlist of min(K, |rows|) candidates, reranked by the
// classification head.
inline RankedList retrieve_and_rerank(const NeuralModel& model, const EmbeddingCache& cache,
                                      const TokenSeq& point, std::span<const std::size_t> rows, std::size_t k,
                                      OpCounts* ops = nullptr) {
  const RankedList shortlist = retrieve_topk(cache, model.point_retrieval(point), rows, k, model.retrieval_metric(), ops);
  return rerank(model, model.point_base(point), shortlist, cache, ops);
}

}  // namespace counterrank

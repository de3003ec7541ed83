// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterrank/features.hpp"
#include "counterrank/ranked_list.hpp"

namespace counterrank {

struct LinearWeights {
  std::array<double, kNumFeatures> alpha{};
};

// Hand-tuned coefficients: the TF-Manhattan and Earth-Mover sums weigh 0.9,
// the TF-Manhattan min and max weigh -0.1, everything else is unused.
inline LinearWeights default_simplesd_weights() {
  LinearWeights w;
  w.alpha[feature_index(MetricGroup::kTfManhattan, AggKind::kSum)] = 0.9;     // x4
  w.alpha[feature_index(MetricGroup::kEmbEarthMover, AggKind::kSum)] = 0.9;   // x8
  w.alpha[feature_index(MetricGroup::kTfManhattan, AggKind::kMin)] = -0.1;    // x1
  w.alpha[feature_index(MetricGroup::kTfManhattan, AggKind::kMax)] = -0.1;    // x2
  return w;
}

inline LinearWeights weights_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != kNumFeatures) throw Error("simplesd.alpha must have exactly 20 entries");
  LinearWeights w;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (!std::isfinite(v[i])) throw Error("simplesd.alpha entries must be finite");
    w.alpha[i] = v[i];
  }
  return w;
}

inline double simplesd_score(const FeatureVector& x, const LinearWeights& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) s += w.alpha[i] * x[i];
  return s;
}

// Scores every pool member on raw (unstandardized) features.
inline RankedList rank_by_simplesd(const CorpusFeaturizer& fz, std::size_t point,
                                   const std::vector<std::size_t>& pool, const Bm25Stats& stats,
                                   const LinearWeights& w) {
  std::vector<RankedEntry> entries;
  entries.reserve(pool.size());
  for (std::size_t c : pool)
    entries.push_back({fz.corpus()[c].id, simplesd_score(fz.features(point, c, stats), w)});
  return make_ranked_list(std::move(entries));
}

inline RankedList rank_by_simplesd(const CorpusFeaturizer& fz, std::size_t point, Setting setting,
                                   const LinearWeights& w) {
  return rank_by_simplesd(fz, point, candidate_pool(fz.corpus(), point, setting),
                          fz.pool_stats(point, setting), w);
}

}  // namespace counterrank

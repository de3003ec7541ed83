// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "counterrank/common.hpp"
#include "counterrank/textrep.hpp"

namespace counterrank {

enum class AggKind { kMin, kMax, kProduct, kSum };

inline constexpr AggKind kAllAggKinds[] = {AggKind::kMin, AggKind::kMax, AggKind::kProduct,
                                           AggKind::kSum};

inline double aggregate(double val_cl, double val_pr, AggKind kind) {
  switch (kind) {
    case AggKind::kMin: return std::min(val_cl, val_pr);
    case AggKind::kMax: return std::max(val_cl, val_pr);
    case AggKind::kProduct: return val_cl * val_pr;
    case AggKind::kSum: return val_cl + val_pr;
  }
  return 0.0;
}

// Maps a distance in [0, inf) to a similarity in (0, 1].
inline double inverse_distance(double d) { return 1.0 / (1.0 + d); }

// 1 / (1 + L1 distance) between term-frequency vectors.
inline double manhattan_sim(const TfVector& a, const TfVector& b) {
  double d = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() || ib != b.entries.end()) {
    if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
      d += std::abs(ia->second);
      ++ia;
    } else if (ia == a.entries.end() || ib->first < ia->first) {
      d += std::abs(ib->second);
      ++ib;
    } else {
      d += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return inverse_distance(d);
}

inline double cosine_tf_sim(const TfVector& a, const TfVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [_, w] : a.entries) na += w * w;
  for (const auto& [_, w] : b.entries) nb += w * w;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Cosine between dense vectors; 0 if either is the zero vector.
template <typename T, typename U>
double emb_cosine(std::span<const T> u, std::span<const U> v) {
  if (u.size() != v.size()) throw Error("emb_cosine: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i], b = v[i];
    dot += a * b;
    nu += a * a;
    nv += b * b;
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double emb_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return emb_cosine(std::span<const double>(u), std::span<const double>(v));
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

struct TermCounts {
  std::unordered_map<std::string, std::uint32_t> counts;
  std::size_t length = 0;

  TermCounts() = default;
  explicit TermCounts(const TokenSeq& tokens) : length(tokens.size()) {
    for (const auto& t : tokens) ++counts[t];
  }

  std::uint32_t count(const std::string& t) const {
    auto it = counts.find(t);
    return it == counts.end() ? 0 : it->second;
  }
};

// Collection statistics. Documents can be added and removed so a pool that is
// "everything but the query point" is derived from the full collection.
class Bm25Stats {
 public:
  static constexpr double kK1 = 1.2;
  static constexpr double kB = 0.75;

  void add(const TermCounts& doc) {
    ++n_docs_;
    total_len_ += doc.length;
    for (const auto& [t, _] : doc.counts) ++df_[t];
  }

  void remove(const TermCounts& doc) {
    if (n_docs_ == 0) throw Error("Bm25Stats::remove on empty stats");
    --n_docs_;
    total_len_ -= doc.length;
    for (const auto& [t, _] : doc.counts) {
      auto it = df_.find(t);
      if (it == df_.end() || it->second == 0) throw Error("Bm25Stats::remove of unknown document");
      if (--it->second == 0) df_.erase(it);
    }
  }

  std::size_t n_docs() const { return n_docs_; }
  std::size_t df(const std::string& t) const {
    auto it = df_.find(t);
    return it == df_.end() ? 0 : it->second;
  }
  double avg_len() const {
    return n_docs_ == 0 ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(n_docs_);
  }

  double idf(const std::string& t) const {
    const double n = static_cast<double>(n_docs_);
    const double d = static_cast<double>(df(t));
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
  }

 private:
  std::size_t n_docs_ = 0;
  std::size_t total_len_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

inline Bm25Stats build_bm25_stats(const std::vector<TokenSeq>& docs) {
  Bm25Stats stats;
  for (const auto& d : docs) stats.add(TermCounts(d));
  return stats;
}

// Sum over distinct query terms of idf * saturated term frequency.
inline double bm25_score(const TermCounts& query, const TermCounts& doc, const Bm25Stats& stats) {
  const double avg = stats.avg_len();
  const double len_ratio = avg > 0.0 ? static_cast<double>(doc.length) / avg : 1.0;
  const double norm = Bm25Stats::kK1 * (1.0 - Bm25Stats::kB + Bm25Stats::kB * len_ratio);
  double score = 0.0;
  for (const auto& [t, _] : query.counts) {
    const double f = doc.count(t);
    if (f == 0.0) continue;
    score += stats.idf(t) * f * (Bm25Stats::kK1 + 1.0) / (f + norm);
  }
  return score;
}

inline double bm25_score(const TokenSeq& query, const TokenSeq& doc, const Bm25Stats& stats) {
  return bm25_score(TermCounts(query), TermCounts(doc), stats);
}

// ---------------------------------------------------------------------------
// Balanced transportation problem
// ---------------------------------------------------------------------------

struct TransportResult {
  double cost = 0.0;
  std::vector<double> plan;  // row-major rows x cols
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t i, std::size_t j) const { return plan[i * cols + j]; }
};

namespace detail {

// Rounds weights onto an integer grid summing exactly to `scale`.
inline std::vector<std::int64_t> scale_weights(std::span<const double> w, std::int64_t scale) {
  std::vector<std::int64_t> out(w.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = std::llround(w[i] * static_cast<double>(scale));
    total += out[i];
  }
  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
  for (std::size_t k = 0; total != scale; k = (k + 1) % order.size()) {
    auto& v = out[order[k]];
    if (total < scale) {
      ++v;
      ++total;
    } else if (v > 0) {
      --v;
      --total;
    }
  }
  return out;
}

}  // namespace detail

// Exact min-cost solution of the balanced transportation problem by
// successive shortest paths (Dijkstra with potentials) on the bipartite
// residual graph. Masses are scaled to integers on a 2^40 grid.
inline TransportResult solve_transport(std::span<const double> supply,
                                       std::span<const double> demand,
                                       std::span<const double> cost) {
  const std::size_t n = supply.size();
  const std::size_t m = demand.size();
  if (n == 0 || m == 0) throw Error("solve_transport: empty supply or demand");
  if (cost.size() != n * m) throw Error("solve_transport: cost matrix has wrong size");
  double s_sum = 0.0, d_sum = 0.0;
  for (double s : supply) {
    if (!(s >= 0.0)) throw Error("solve_transport: negative supply");
    s_sum += s;
  }
  for (double d : demand) {
    if (!(d >= 0.0)) throw Error("solve_transport: negative demand");
    d_sum += d;
  }
  if (std::abs(s_sum - 1.0) > 1e-9 || std::abs(d_sum - 1.0) > 1e-9)
    throw Error("solve_transport: unbalanced inputs (supply " + std::to_string(s_sum) +
                ", demand " + std::to_string(d_sum) + ")");
  for (double c : cost)
    if (!std::isfinite(c) || c < 0.0) throw Error("solve_transport: invalid cost entry");

  constexpr std::int64_t kScale = std::int64_t{1} << 40;
  std::vector<double> sup(supply.begin(), supply.end());
  std::vector<double> dem(demand.begin(), demand.end());
  for (auto& s : sup) s /= s_sum;
  for (auto& d : dem) d /= d_sum;
  std::vector<std::int64_t> row_left = detail::scale_weights(sup, kScale);
  std::vector<std::int64_t> col_left = detail::scale_weights(dem, kScale);
  std::vector<std::int64_t> flow(n * m, 0);

  // Nodes 0..n-1 are rows, n..n+m-1 are columns.
  const std::size_t nodes = n + m;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> potential(nodes, 0.0);
  std::vector<double> dist(nodes);
  std::vector<std::size_t> parent(nodes);
  std::vector<bool> done(nodes);

  std::int64_t remaining = kScale;
  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), false);
    for (std::size_t i = 0; i < n; ++i)
      if (row_left[i] > 0) {
        dist[i] = 0.0;
        parent[i] = nodes;
      }
    std::size_t target = nodes;
    double target_dist = kInf;
    for (;;) {
      std::size_t u = nodes;
      double best = kInf;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      if (u == nodes) break;
      done[u] = true;
      if (u >= n && col_left[u - n] > 0) {
        target = u;
        target_dist = best;
        break;
      }
      if (u < n) {
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t v = n + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, cost[u * m + j] + potential[u] - potential[v]);
          if (best + rc < dist[v]) {
            dist[v] = best + rc;
            parent[v] = u;
          }
        }
      } else {
        const std::size_t j = u - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (done[i] || flow[i * m + j] == 0) continue;
          const double rc = std::max(0.0, -cost[i * m + j] + potential[u] - potential[i]);
          if (best + rc < dist[i]) {
            dist[i] = best + rc;
            parent[i] = u;
          }
        }
      }
    }
    if (target == nodes) throw Error("solve_transport: no augmenting path (internal error)");

    // Bottleneck along the path.
    std::int64_t amount = col_left[target - n];
    std::size_t v = target;
    while (parent[v] != nodes) {
      const std::size_t u = parent[v];
      if (u >= n) amount = std::min(amount, flow[v * m + (u - n)]);  // backward arc col->row
      v = u;
    }
    amount = std::min(amount, row_left[v]);

    v = target;
    while (parent[v] != nodes) {
      const std::size_t u = parent[v];
      if (u < n) {
        flow[u * m + (v - n)] += amount;
      } else {
        flow[v * m + (u - n)] -= amount;
      }
      v = u;
    }
    row_left[v] -= amount;
    col_left[target - n] -= amount;
    remaining -= amount;

    for (std::size_t k = 0; k < nodes; ++k)
      if (dist[k] < kInf) potential[k] += std::min(dist[k], target_dist);
      else potential[k] += target_dist;
  }

  TransportResult result;
  result.rows = n;
  result.cols = m;
  result.plan.resize(n * m);
  for (std::size_t k = 0; k < n * m; ++k) {
    result.plan[k] = static_cast<double>(flow[k]) / static_cast<double>(kScale);
    result.cost += result.plan[k] * cost[k];
  }
  return result;
}

// ---------------------------------------------------------------------------
// Word mover's distance
// ---------------------------------------------------------------------------

inline constexpr std::size_t kWmdMaxTokens = 256;

inline double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Transport distance between bags under Euclidean ground cost. Bags larger
// than kWmdMaxTokens are truncated to their highest-weight entries.
inline double word_movers_distance(const EmbeddingBag& a_in, const EmbeddingBag& b_in) {
  if (a_in.empty() || b_in.empty()) throw Error("word_movers_distance of an empty bag");
  const EmbeddingBag a = truncate_bag(a_in, kWmdMaxTokens);
  const EmbeddingBag b = truncate_bag(b_in, kWmdMaxTokens);
  std::vector<double> sa, sb, cost(a.size() * b.size());
  for (const auto& e : a) sa.push_back(e.weight);
  for (const auto& e : b) sb.push_back(e.weight);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) cost[i * b.size() + j] = euclidean(a[i].vec, b[j].vec);
  return solve_transport(sa, sb, cost).cost;
}

// 1 / (1 + WMD); 0 when either bag is empty (no in-vocabulary tokens).
inline double wmd_sim(const EmbeddingBag& a, const EmbeddingBag& b) {
  if (a.empty() || b.empty()) return 0.0;
  return inverse_distance(word_movers_distance(a, b));
}

}  // namespace counterrank

// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterrank/common.hpp"
#include "counterrank/features.hpp"
#include "counterrank/ranked_list.hpp"

namespace counterrank {

// ---------------------------------------------------------------------------
// Pointwise dataset
// ---------------------------------------------------------------------------

struct PointwiseDataset {
  std::vector<FeatureRecord> rows;

  std::size_t positives() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const FeatureRecord& r) { return r.label == 1; }));
  }
};

// One positive row (the gold counter) and up to n_neg uniformly sampled
// negatives from the rest of the pool, per point. Features are raw.
inline PointwiseDataset build_pointwise_dataset(const CorpusFeaturizer& fz, Setting setting,
                                                std::size_t n_neg, std::uint64_t seed) {
  if (n_neg < 1) throw Error("n_neg must be at least 1");
  const Corpus& corpus = fz.corpus();
  Rng rng(seed);
  PointwiseDataset ds;
  for (std::size_t p : corpus.points()) {
    const std::size_t gold = corpus.position(*corpus[p].counter_id);
    std::vector<std::size_t> negatives;
    for (std::size_t c : candidate_pool(corpus, p, setting))
      if (c != gold) negatives.push_back(c);
    const Bm25Stats stats = fz.pool_stats(p, setting);
    ds.rows.push_back({corpus[p].id, corpus[gold].id, 1, fz.features(p, gold, stats)});
    for (std::size_t k : sample_without_replacement(negatives.size(), n_neg, rng)) {
      const std::size_t c = negatives[k];
      ds.rows.push_back({corpus[p].id, corpus[c].id, 0, fz.features(p, c, stats)});
    }
  }
  return ds;
}

inline Standardizer fit_standardizer(const PointwiseDataset& ds) {
  std::vector<FeatureVector> xs;
  xs.reserve(ds.rows.size());
  for (const auto& r : ds.rows) xs.push_back(r.x);
  return fit_standardizer(xs);
}

inline PointwiseDataset standardize(PointwiseDataset ds, const Standardizer& s) {
  for (auto& r : ds.rows) r.x = s.apply(r.x);
  return ds;
}

namespace detail {

inline void require_both_classes(const PointwiseDataset& ds) {
  const std::size_t pos = ds.positives();
  if (pos == 0 || pos == ds.rows.size()) throw Error("training data must contain both classes");
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

// Uses the first weights.size() features (8 for the part variant, 20 for full).
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
};

struct LogRegConfig {
  double C = 50.0;
  std::size_t max_iter = 1000;
  bool balanced = true;
  double tol = 1e-6;
  std::size_t n_features = kNumFeatures;
};

inline double logreg_margin(const LinearModel& m, const FeatureVector& x) {
  double z = m.bias;
  for (std::size_t i = 0; i < m.weights.size(); ++i) z += m.weights[i] * x[i];
  return z;
}

inline double predict_logreg(const LinearModel& m, const FeatureVector& x) {
  return detail::sigmoid(logreg_margin(m, x));
}

// Per-row sample weights: M / (2 M_class) when balanced, 1 otherwise.
inline std::vector<double> class_weights(const PointwiseDataset& ds, bool balanced) {
  std::vector<double> w(ds.rows.size(), 1.0);
  if (!balanced) return w;
  const double m = static_cast<double>(ds.rows.size());
  const double pos = static_cast<double>(ds.positives());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = ds.rows[i].label ? m / (2.0 * pos) : m / (2.0 * (m - pos));
  return w;
}

// C * sum_i s_i * logloss_i + ||w||^2 / 2; the bias is not penalized. Writes
// the gradient (weights then bias) when grad is non-null.
inline double logreg_objective(const LinearModel& m, const PointwiseDataset& ds,
                               std::span<const double> sample_w, double C,
                               std::vector<double>* grad = nullptr) {
  const std::size_t d = m.weights.size();
  double f = 0.0;
  for (double w : m.weights) f += 0.5 * w * w;
  if (grad) {
    grad->assign(d + 1, 0.0);
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] = m.weights[j];
  }
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& r = ds.rows[i];
    const double z = logreg_margin(m, r.x);
    // -y log p - (1-y) log(1-p) = softplus(z) - y z
    f += C * sample_w[i] * (detail::softplus(z) - (r.label ? z : 0.0));
    if (grad) {
      const double g = C * sample_w[i] * (detail::sigmoid(z) - r.label);
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += g * r.x[j];
      (*grad)[d] += g;
    }
  }
  return f;
}

struct LogRegTrace {
  std::size_t iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_grad_inf = 0.0;
};

// Full-batch gradient descent with Armijo backtracking. The trial step grows
// after each accepted step so ill-conditioned problems do not stall.
inline LinearModel train_logreg(const PointwiseDataset& ds, const LogRegConfig& cfg = {},
                                LogRegTrace* trace = nullptr) {
  detail::require_both_classes(ds);
  if (cfg.n_features < 1 || cfg.n_features > kNumFeatures) throw Error("invalid feature count");
  const std::vector<double> sw = class_weights(ds, cfg.balanced);
  LinearModel m{std::vector<double>(cfg.n_features, 0.0), 0.0};
  std::vector<double> g;
  double f = logreg_objective(m, ds, sw, cfg.C, &g);
  if (trace) trace->initial_objective = f;
  double step = 1.0 / (cfg.C * static_cast<double>(ds.rows.size()));
  std::size_t it = 0;
  auto inf_norm = [](const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n = std::max(n, std::abs(x));
    return n;
  };
  for (; it < cfg.max_iter && inf_norm(g) >= cfg.tol; ++it) {
    double g2 = 0.0;
    for (double x : g) g2 += x * x;
    LinearModel trial = m;
    double f_new = f;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < cfg.n_features; ++j) trial.weights[j] = m.weights[j] - step * g[j];
      trial.bias = m.bias - step * g[cfg.n_features];
      f_new = logreg_objective(trial, ds, sw, cfg.C);
      if (f_new <= f - 0.5 * step * g2) break;
      step *= 0.5;
    }
    if (!(f_new < f)) break;  // no descent possible at machine precision
    m = trial;
    f = logreg_objective(m, ds, sw, cfg.C, &g);
    step *= 2.0;
  }
  if (trace) {
    trace->iterations = it;
    trace->final_objective = f;
    trace->final_grad_inf = inf_norm(g);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // x[feature] < threshold
  int right = -1;  // x[feature] >= threshold
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const FeatureVector& x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (nodes[i].feature >= 0) {
        stack.push_back({nodes[i].left, d + 1});
        stack.push_back({nodes[i].right, d + 1});
      }
    }
    return best;
  }
};

struct TreeEnsemble {
  double base_score = 0.0;
  double learning_rate = 0.01;
  std::size_t n_features = kNumFeatures;
  std::vector<RegressionTree> trees;

  double margin(const FeatureVector& x) const {
    double z = base_score;
    for (const auto& t : trees) z += learning_rate * t.predict(x);
    return z;
  }
};

inline double predict_gbdt(const TreeEnsemble& e, const FeatureVector& x) {
  return detail::sigmoid(e.margin(x));
}

inline std::vector<double> predict_gbdt(const TreeEnsemble& e, std::span<const FeatureVector> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict_gbdt(e, x));
  return out;
}

struct GbdtConfig {
  std::size_t max_depth = 8;
  double learning_rate = 0.01;
  std::size_t n_estimators = 1000;
  double min_child_weight = 5.0;
  double subsample = 0.8;
  double colsample_bytree = 0.7;
  double reg_lambda = 0.4;
  double scale_pos_weight = 0.8;
  std::uint64_t seed = 0;
  std::size_t n_features = kNumFeatures;
};

namespace detail {

inline double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy search over the given rows and features. Thresholds sit
// halfway between consecutive distinct values; both children must carry at
// least min_child_weight hessian. Ties keep the first (feature, threshold).
inline SplitChoice find_best_split(std::span<const FeatureRecord> rows,
                                   std::span<const std::size_t> node_rows,
                                   std::span<const double> grad, std::span<const double> hess,
                                   std::span<const std::size_t> features, double lambda,
                                   double min_child_weight) {
  double g_tot = 0.0, h_tot = 0.0;
  for (std::size_t r : node_rows) {
    g_tot += grad[r];
    h_tot += hess[r];
  }
  SplitChoice best;
  std::vector<std::size_t> order(node_rows.begin(), node_rows.end());
  for (std::size_t f : features) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rows[a].x[f] != rows[b].x[f]) return rows[a].x[f] < rows[b].x[f];
      return a < b;
    });
    double gl = 0.0, hl = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      gl += grad[order[k]];
      hl += hess[order[k]];
      const double v = rows[order[k]].x[f], next = rows[order[k + 1]].x[f];
      if (v == next) continue;
      const double hr = h_tot - hl;
      if (hl < min_child_weight || hr < min_child_weight) continue;
      const double gain = split_gain(gl, hl, g_tot - gl, hr, lambda);
      if (gain > best.gain) best = {static_cast<int>(f), v + 0.5 * (next - v), gain};
    }
  }
  return best;
}

inline RegressionTree grow_tree(std::span<const FeatureRecord> rows, std::vector<std::size_t> sample,
                                std::span<const double> grad, std::span<const double> hess,
                                std::span<const std::size_t> features, const GbdtConfig& cfg) {
  RegressionTree tree;
  struct Pending {
    int node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  tree.nodes.push_back({});
  std::vector<Pending> stack;
  stack.push_back({0, std::move(sample), 0});
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    double g = 0.0, h = 0.0;
    for (std::size_t r : cur.rows) {
      g += grad[r];
      h += hess[r];
    }
    SplitChoice s;
    if (cur.depth < cfg.max_depth)
      s = find_best_split(rows, cur.rows, grad, hess, features, cfg.reg_lambda, cfg.min_child_weight);
    if (s.feature < 0 || s.gain <= 1e-12) {
      tree.nodes[cur.node].value = -g / (h + cfg.reg_lambda);
      continue;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : cur.rows) (rows[r].x[s.feature] < s.threshold ? left : right).push_back(r);
    const int l = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    TreeNode& n = tree.nodes[cur.node];
    n.feature = s.feature;
    n.threshold = s.threshold;
    n.left = l;
    n.right = l + 1;
    stack.push_back({l + 1, std::move(right), cur.depth + 1});
    stack.push_back({l, std::move(left), cur.depth + 1});
  }
  return tree;
}

}  // namespace detail

// Logistic loss with positives weighted by scale_pos_weight, averaged over
// rows. Boosting with full row/column sampling never increases it.
inline double gbdt_weighted_logloss(const TreeEnsemble& e, const PointwiseDataset& ds,
                                    double scale_pos_weight) {
  double loss = 0.0;
  for (const auto& r : ds.rows) {
    const double z = e.margin(r.x);
    loss += r.label ? scale_pos_weight * detail::softplus(-z) : detail::softplus(z);
  }
  return loss / static_cast<double>(ds.rows.size());
}

// Called after each boosting round with the ensemble so far.
using GbdtRoundHook = std::function<void(const TreeEnsemble&)>;

inline TreeEnsemble train_gbdt(const PointwiseDataset& ds, const GbdtConfig& cfg = {},
                               const GbdtRoundHook& hook = nullptr) {
  detail::require_both_classes(ds);
  if (cfg.n_features < 1 || cfg.n_features > kNumFeatures) throw Error("invalid feature count");
  if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) throw Error("subsample must be in (0, 1]");
  if (!(cfg.colsample_bytree > 0.0 && cfg.colsample_bytree <= 1.0))
    throw Error("colsample_bytree must be in (0, 1]");
  const std::size_t m = ds.rows.size();
  const double pos = static_cast<double>(ds.positives());
  TreeEnsemble e;
  e.base_score = std::log(pos / (static_cast<double>(m) - pos));
  e.learning_rate = cfg.learning_rate;
  e.n_features = cfg.n_features;
  Rng rng(cfg.seed);
  std::vector<double> margin(m, e.base_score), grad(m), hess(m);
  const auto n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.subsample * m)));
  const auto n_cols =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.colsample_bytree * cfg.n_features)));
  for (std::size_t round = 0; round < cfg.n_estimators; ++round) {
    for (std::size_t i = 0; i < m; ++i) {
      const double p = detail::sigmoid(margin[i]);
      const double w = ds.rows[i].label ? cfg.scale_pos_weight : 1.0;
      grad[i] = w * (p - ds.rows[i].label);
      hess[i] = w * std::max(p * (1.0 - p), 1e-16);
    }
    std::vector<std::size_t> sample = n_rows == m ? std::vector<std::size_t>(m)
                                                  : sample_without_replacement(m, n_rows, rng);
    if (n_rows == m) std::iota(sample.begin(), sample.end(), std::size_t{0});
    std::sort(sample.begin(), sample.end());
    std::vector<std::size_t> cols = sample_without_replacement(cfg.n_features, n_cols, rng);
    std::sort(cols.begin(), cols.end());
    e.trees.push_back(detail::grow_tree(ds.rows, std::move(sample), grad, hess, cols, cfg));
    for (std::size_t i = 0; i < m; ++i) margin[i] += e.learning_rate * e.trees.back().predict(ds.rows[i].x);
    if (hook) hook(e);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Ranking and checkpoints
// ---------------------------------------------------------------------------

enum class LtrKind { kLogReg, kGbdt };

// A trained combiner bundled with the standardizer fitted on its training set.
struct LtrModel {
  LtrKind kind = LtrKind::kLogReg;
  Standardizer standardizer;
  LinearModel linear;
  TreeEnsemble ensemble;

  double predict(const FeatureVector& raw) const {
    const FeatureVector z = standardizer.apply(raw);
    return kind == LtrKind::kLogReg ? predict_logreg(linear, z) : predict_gbdt(ensemble, z);
  }

  std::size_t n_features() const {
    return kind == LtrKind::kLogReg ? linear.weights.size() : ensemble.n_features;
  }
};

// Fits the standardizer on `raw`, then the chosen classifier on the
// standardized rows.
inline LtrModel train_ltr(const PointwiseDataset& raw, LtrKind kind, const LogRegConfig& logreg = {},
                          const GbdtConfig& gbdt = {}) {
  LtrModel m;
  m.kind = kind;
  m.standardizer = fit_standardizer(raw);
  const PointwiseDataset z = standardize(raw, m.standardizer);
  if (kind == LtrKind::kLogReg) {
    m.linear = train_logreg(z, logreg);
  } else {
    m.ensemble = train_gbdt(z, gbdt);
  }
  return m;
}

inline RankedList rank_by_classifier(const LtrModel& model, const CorpusFeaturizer& fz,
                                     std::size_t point, const std::vector<std::size_t>& pool,
                                     const Bm25Stats& stats) {
  std::vector<RankedEntry> entries;
  entries.reserve(pool.size());
  for (std::size_t c : pool) entries.push_back({fz.corpus()[c].id, model.predict(fz.features(point, c, stats))});
  return make_ranked_list(std::move(entries));
}

inline RankedList rank_by_classifier(const LtrModel& model, const CorpusFeaturizer& fz,
                                     std::size_t point, Setting setting) {
  return rank_by_classifier(model, fz, point, candidate_pool(fz.corpus(), point, setting),
                            fz.pool_stats(point, setting));
}

inline constexpr int kLtrCheckpointVersion = 1;

inline nlohmann::ordered_json ltr_to_json(const LtrModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "counterrank-ltr";
  j["version"] = kLtrCheckpointVersion;
  j["kind"] = m.kind == LtrKind::kLogReg ? "logreg" : "gbdt";
  j["n_features"] = m.n_features();
  j["standardizer"] = standardizer_to_json(m.standardizer);
  if (m.kind == LtrKind::kLogReg) {
    j["weights"] = m.linear.weights;
    j["bias"] = m.linear.bias;
    return j;
  }
  j["base_score"] = m.ensemble.base_score;
  j["learning_rate"] = m.ensemble.learning_rate;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : m.ensemble.trees) {
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes) {
      nlohmann::ordered_json jn;
      if (n.feature < 0) {
        jn["leaf"] = n.value;
      } else {
        jn["feature"] = n.feature;
        jn["threshold"] = n.threshold;
        jn["left"] = n.left;
        jn["right"] = n.right;
      }
      nodes.push_back(std::move(jn));
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline LtrModel ltr_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "counterrank-ltr") throw Error("not an LTR checkpoint");
  if (j.at("version").get<int>() != kLtrCheckpointVersion) throw Error("unsupported LTR checkpoint version");
  LtrModel m;
  m.standardizer = standardizer_from_json(j.at("standardizer"));
  const auto n_features = j.at("n_features").get<std::size_t>();
  if (n_features < 1 || n_features > kNumFeatures) throw Error("invalid feature count in checkpoint");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "logreg") {
    m.kind = LtrKind::kLogReg;
    m.linear.weights = j.at("weights").get<std::vector<double>>();
    m.linear.bias = j.at("bias").get<double>();
    if (m.linear.weights.size() != n_features) throw Error("weight count does not match n_features");
    return m;
  }
  if (kind != "gbdt") throw Error("unknown LTR model kind: " + kind);
  m.kind = LtrKind::kGbdt;
  m.ensemble.base_score = j.at("base_score").get<double>();
  m.ensemble.learning_rate = j.at("learning_rate").get<double>();
  m.ensemble.n_features = n_features;
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      TreeNode n;
      if (jn.contains("leaf")) {
        n.value = jn.at("leaf").get<double>();
      } else {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      t.nodes.push_back(n);
    }
    const int size = static_cast<int>(t.nodes.size());
    if (size == 0) throw Error("empty tree in checkpoint");
    // Children always follow their parent, which rules out cycles.
    for (int i = 0; i < size; ++i) {
      const TreeNode& n = t.nodes[i];
      if (n.feature >= 0 && (n.feature >= static_cast<int>(n_features) || n.left <= i ||
                             n.right <= i || n.left >= size || n.right >= size))
        throw Error("malformed tree node in checkpoint");
    }
    m.ensemble.trees.push_back(std::move(t));
  }
  return m;
}

}  // namespace counterrank

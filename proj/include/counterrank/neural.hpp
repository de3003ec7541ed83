// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterrank/common.hpp"
#include "counterrank/corpus.hpp"
#include "counterrank/textrep.hpp"

namespace counterrank {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Variants and small numeric helpers
// ---------------------------------------------------------------------------

enum class Variant { kBi, kCross, kUnipolarRet, kUnipolarCls, kBipolar, kBipolarNoAbsdiff, kBipolarNoJoint };

inline constexpr Variant kAllVariants[] = {Variant::kBi,          Variant::kCross,
                                           Variant::kUnipolarRet, Variant::kUnipolarCls,
                                           Variant::kBipolar,     Variant::kBipolarNoAbsdiff,
                                           Variant::kBipolarNoJoint};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBi: return "bi";
    case Variant::kCross: return "cross";
    case Variant::kUnipolarRet: return "unipolar_ret";
    case Variant::kUnipolarCls: return "unipolar_cls";
    case Variant::kBipolar: return "bipolar";
    case Variant::kBipolarNoAbsdiff: return "bipolar_no_absdiff";
    case Variant::kBipolarNoJoint: return "bipolar_no_joint";
  }
  return "?";
}

// Accepts both "bipolar_no_joint" and "bipolar-no-joint".
inline std::optional<Variant> try_parse_variant(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (Variant v : kAllVariants)
    if (to_string(v) == norm) return v;
  return std::nullopt;
}

inline Variant parse_variant(std::string_view s) {
  if (auto v = try_parse_variant(s)) return *v;
  throw Error("unknown neural variant: \"" + std::string(s) + "\"");
}

enum class RetrievalMetric { kDot, kEuclidean };

inline std::string_view to_string(RetrievalMetric m) { return m == RetrievalMetric::kDot ? "dot" : "euclidean"; }

inline RetrievalMetric parse_retrieval_metric(std::string_view s) {
  if (s == "dot") return RetrievalMetric::kDot;
  if (s == "euclidean") return RetrievalMetric::kEuclidean;
  throw Error("unknown retrieval metric: \"" + std::string(s) + "\" (expected dot|euclidean)");
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double triplet_loss(double d_pos, double d_neg, double margin) {
  return std::max(d_pos - d_neg + margin, 0.0);
}

inline double cross_entropy(double p, int y) {
  p = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

inline Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, double eps = 1e-5) {
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gamma[i] * (x[i] - mu) * inv + beta[i];
  return y;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

inline constexpr std::size_t kUnkIndex = 0;
inline constexpr std::size_t kSepIndex = 1;

class Vocab {
 public:
  Vocab() : tokens_{"[UNK]", "[SEP]"} {}

  // Reserved entries first, then the given tokens in the given order.
  explicit Vocab(const std::vector<std::string>& tokens) : Vocab() {
    for (const auto& t : tokens) {
      if (index_.contains(t) || t == "[UNK]" || t == "[SEP]") throw Error("duplicate vocab token: " + t);
      index_.emplace(t, tokens_.size());
      tokens_.push_back(t);
    }
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::size_t index(const std::string& t) const {
    auto it = index_.find(t);
    return it == index_.end() ? kUnkIndex : it->second;
  }

  // Non-reserved tokens, in index order.
  std::vector<std::string> entries() const { return {tokens_.begin() + 2, tokens_.end()}; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Sorted distinct tokens of every argument text.
inline Vocab build_vocab(const Corpus& corpus) {
  std::vector<std::string> all;
  for (const auto& a : corpus.arguments())
    for (auto& t : tokenize(a.full_text())) all.push_back(std::move(t));
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return Vocab(all);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

// Row-major matrix (or column vector when cols == 1) with its gradient.
struct Param {
  std::string name;
  std::size_t rows = 0, cols = 0;
  Vec w, g;
};

struct ModelDims {
  std::size_t d_emb = 64;
  std::size_t d_model = 64;
};

struct Triple {
  TokenSeq point, pos, neg;
};

class NeuralModel {
 public:
  NeuralModel() = default;

  NeuralModel(Variant variant, Vocab vocab, ModelDims dims, std::uint64_t seed)
      : variant_(variant), vocab_(std::move(vocab)), dims_(dims) {
    if (dims.d_emb == 0 || dims.d_model == 0) throw Error("model dimensions must be positive");
    Rng rng(seed);
    const std::size_t d = dims.d_model;
    auto enc = [&] { return add_encoder(rng); };
    switch (variant) {
      case Variant::kBi:
        ret_p_ = enc();
        ret_c_ = enc();
        break;
      case Variant::kCross:
        cls_enc_ = enc();
        cross_w_ = add_param("cross.weight", 2, d, rng, 1.0 / std::sqrt(double(d)));
        cross_b_ = add_param("cross.bias", 2, 1, rng, 0.0);
        break;
      case Variant::kUnipolarRet:
        ret_p_ = ret_c_ = enc();
        add_ret_head(rng);
        break;
      case Variant::kUnipolarCls:
        cls_enc_ = enc();
        add_cls_head(rng, true);
        break;
      case Variant::kBipolar:
      case Variant::kBipolarNoAbsdiff:
        ret_p_ = ret_c_ = cls_enc_ = enc();
        add_ret_head(rng);
        add_cls_head(rng, variant == Variant::kBipolar);
        break;
      case Variant::kBipolarNoJoint:
        ret_p_ = ret_c_ = enc();
        add_ret_head(rng);
        cls_enc_ = enc();
        add_cls_head(rng, true);
        break;
    }
  }

  Variant variant() const { return variant_; }
  const Vocab& vocab() const { return vocab_; }
  const ModelDims& dims() const { return dims_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  RetrievalMetric retrieval_metric() const { return metric_; }
  void set_retrieval_metric(RetrievalMetric m) { metric_ = m; }

  bool has_retrieval() const { return ret_p_ >= 0; }
  bool has_classification() const { return cls_enc_ >= 0; }
  bool is_cross() const { return cross_w_ >= 0; }
  bool uses_absdiff() const { return cls_absdiff_; }
  bool shared_encoder() const {
    return variant_ != Variant::kBi && variant_ != Variant::kBipolarNoJoint;
  }

  Param& param(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return p;
    throw Error("no parameter named " + name);
  }

  // ---- inference -----------------------------------------------------------

  Vec point_retrieval(const TokenSeq& t) const { return ret_forward(enc_forward(require_ret(ret_p_), ids_of(t)).u); }
  Vec candidate_retrieval(const TokenSeq& t) const { return ret_forward(enc_forward(require_ret(ret_c_), ids_of(t)).u); }

  // Base embedding feeding the classification head (or the retrieval path
  // for retrieval-only models).
  Vec point_base(const TokenSeq& t) const { return enc_forward(base_encoder(true), ids_of(t)).u; }
  Vec candidate_base(const TokenSeq& t) const { return enc_forward(base_encoder(false), ids_of(t)).u; }

  double retrieval_score(const Vec& rp, const Vec& rc) const {
    return metric_ == RetrievalMetric::kDot ? dot(rp, rc) : -l2_distance(rp, rc);
  }

  // Probability of the positive class from base embeddings; not for cross.
  double classification_prob_base(const Vec& u, const Vec& v) const {
    if (!has_classification() || is_cross()) throw Error("model has no classification head over base embeddings");
    return cls_forward(u, v).p1;
  }

  double classification_prob(const TokenSeq& p, const TokenSeq& c) const {
    if (!has_classification()) throw Error(std::string("variant ") + std::string(to_string(variant_)) +
                                           " has no classification path");
    if (is_cross()) return cross_forward(p, c).p1;
    return classification_prob_base(point_base(p), candidate_base(c));
  }

  // Embedding used to find hard negatives: the retrieval embedding when the
  // model has one, otherwise the base embedding.
  Vec sampling_embedding(const TokenSeq& t) const {
    return has_retrieval() ? candidate_retrieval(t) : enc_forward(cls_enc_, ids_of(t)).u;
  }

  // Classification input as built by the head (width 3d, or 2d without |u-v|).
  Vec classification_input(const Vec& u, const Vec& v) const {
    Vec x(u);
    x.insert(x.end(), v.begin(), v.end());
    if (cls_absdiff_)
      for (std::size_t i = 0; i < u.size(); ++i) x.push_back(std::abs(u[i] - v[i]));
    return x;
  }

  // ---- training ------------------------------------------------------------

  void zero_grad() {
    for (auto& p : params_) std::fill(p.g.begin(), p.g.end(), 0.0);
  }

  // Loss of the variant on one triple. Retrieval-only: triplet loss on
  // retrieval embeddings. Classification-only: CE(p, pos, 1) + CE(p, neg, 0).
  // Joint: the sum of both. Gradients are accumulated times grad_scale when
  // grad_scale != 0.
  double triple_loss(const Triple& t, double margin, double grad_scale = 0.0) {
    Graph gr(*this);
    double loss = 0.0;
    const bool ret_loss = variant_ != Variant::kCross && variant_ != Variant::kUnipolarCls;
    const bool cls_loss = variant_ != Variant::kBi && variant_ != Variant::kUnipolarRet;
    if (ret_loss) loss += gr.triplet(t, margin, grad_scale);
    if (cls_loss) {
      loss += gr.ce(t.point, t.pos, 1, grad_scale);
      loss += gr.ce(t.point, t.neg, 0, grad_scale);
    }
    if (grad_scale != 0.0) gr.backward();
    return loss;
  }

  // Cross-entropy of one labeled pair (pointwise training).
  double pair_loss(const TokenSeq& p, const TokenSeq& c, int label, double grad_scale = 0.0) {
    if (!has_classification()) throw Error("pair loss needs a classification path");
    Graph gr(*this);
    const double loss = gr.ce(p, c, label, grad_scale);
    if (grad_scale != 0.0) gr.backward();
    return loss;
  }

  // Builds a bipolar_no_joint model from separately trained parts.
  static NeuralModel bundle_no_joint(const NeuralModel& ret, const NeuralModel& cls) {
    if (ret.variant_ != Variant::kUnipolarRet || cls.variant_ != Variant::kUnipolarCls)
      throw Error("bundle_no_joint needs a unipolar_ret and a unipolar_cls model");
    if (!(ret.vocab_ == cls.vocab_) || ret.dims_.d_emb != cls.dims_.d_emb ||
        ret.dims_.d_model != cls.dims_.d_model)
      throw Error("bundled models must share vocabulary and dimensions");
    NeuralModel m(Variant::kBipolarNoJoint, ret.vocab_, ret.dims_, 0);
    m.metric_ = ret.metric_;
    auto copy = [&](const NeuralModel& src, const std::string& from, const std::string& to) {
      const Param& s = src.params_[src.find(from)];
      Param& d = m.params_[m.find(to)];
      d.w = s.w;
    };
    for (const char* n : {".emb", ".proj.weight", ".proj.bias"}) {
      copy(ret, std::string("enc0") + n, std::string("enc0") + n);
      copy(cls, std::string("enc0") + n, std::string("enc1") + n);
    }
    for (const char* n : {"ret.weight", "ret.bias"}) copy(ret, n, n);
    for (const char* n : {"cls.ln.gamma", "cls.ln.beta", "cls.weight", "cls.bias"}) copy(cls, n, n);
    return m;
  }

  // ---- checkpoint ----------------------------------------------------------

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["format"] = "counterrank-neural";
    j["version"] = 1;
    j["variant"] = to_string(variant_);
    j["d_emb"] = dims_.d_emb;
    j["d_model"] = dims_.d_model;
    j["retrieval_metric"] = to_string(metric_);
    j["vocab"] = vocab_.entries();
    nlohmann::ordered_json tensors;
    for (const auto& p : params_) {
      nlohmann::ordered_json t;
      t["shape"] = {p.rows, p.cols};
      t["data"] = p.w;
      tensors[p.name] = std::move(t);
    }
    j["tensors"] = std::move(tensors);
    return j;
  }

  static NeuralModel from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "counterrank-neural") throw Error("not a neural checkpoint");
    if (j.at("version").get<int>() != 1) throw Error("unsupported neural checkpoint version");
    ModelDims dims{j.at("d_emb").get<std::size_t>(), j.at("d_model").get<std::size_t>()};
    NeuralModel m(parse_variant(j.at("variant").get<std::string>()),
                  Vocab(j.at("vocab").get<std::vector<std::string>>()), dims, 0);
    m.metric_ = parse_retrieval_metric(j.at("retrieval_metric").get<std::string>());
    const auto& tensors = j.at("tensors");
    if (tensors.size() != m.params_.size()) throw Error("checkpoint tensor count does not match variant");
    for (auto& p : m.params_) {
      if (!tensors.contains(p.name)) throw Error("checkpoint is missing tensor " + p.name);
      const auto& t = tensors.at(p.name);
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != p.rows || shape[1] != p.cols)
        throw Error("tensor " + p.name + " has the wrong shape");
      auto data = t.at("data").get<Vec>();
      if (data.size() != p.w.size()) throw Error("tensor " + p.name + " has the wrong size");
      for (double v : data)
        if (!std::isfinite(v)) throw Error("tensor " + p.name + " holds a non-finite value");
      p.w = std::move(data);
    }
    return m;
  }

 private:
  struct EncoderIdx {
    int emb, w, b;
  };
  struct EncPass {
    int enc;
    std::vector<std::size_t> ids;
    Vec m, u;
  };
  struct ClsPass {
    Vec x, xhat, y, logits;
    double inv_std = 0.0;
    double p1 = 0.5;
  };

  // ---- construction helpers ----

  int add_param(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng, double stddev,
                double fill = 0.0) {
    Param p{name, rows, cols, Vec(rows * cols, fill), Vec(rows * cols, 0.0)};
    if (stddev > 0.0) {
      std::normal_distribution<double> nd(0.0, stddev);
      for (auto& v : p.w) v = nd(rng);
    }
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
  }

  int add_encoder(Rng& rng) {
    const std::string pre = "enc" + std::to_string(encoders_.size());
    EncoderIdx e;
    e.emb = add_param(pre + ".emb", vocab_.size(), dims_.d_emb, rng, 1.0);
    e.w = add_param(pre + ".proj.weight", dims_.d_model, dims_.d_emb, rng, 1.0 / std::sqrt(double(dims_.d_emb)));
    e.b = add_param(pre + ".proj.bias", dims_.d_model, 1, rng, 0.0);
    encoders_.push_back(e);
    return static_cast<int>(encoders_.size()) - 1;
  }

  void add_ret_head(Rng& rng) {
    const std::size_t d = dims_.d_model;
    ret_w_ = add_param("ret.weight", d, d, rng, 1.0 / std::sqrt(double(d)));
    ret_b_ = add_param("ret.bias", d, 1, rng, 0.0);
  }

  void add_cls_head(Rng& rng, bool absdiff) {
    cls_absdiff_ = absdiff;
    const std::size_t k = (absdiff ? 3 : 2) * dims_.d_model;
    ln_gamma_ = add_param("cls.ln.gamma", k, 1, rng, 0.0, 1.0);
    ln_beta_ = add_param("cls.ln.beta", k, 1, rng, 0.0);
    cls_w_ = add_param("cls.weight", 2, k, rng, 1.0 / std::sqrt(double(k)));
    cls_b_ = add_param("cls.bias", 2, 1, rng, 0.0);
  }

  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return i;
    throw Error("no parameter named " + name);
  }

  int require_ret(int enc) const {
    if (enc < 0) throw Error(std::string("variant ") + std::string(to_string(variant_)) + " has no retrieval path");
    return enc;
  }

  int base_encoder(bool point_side) const {
    if (has_classification() && !is_cross()) return cls_enc_;
    if (has_retrieval()) return point_side ? ret_p_ : ret_c_;
    throw Error("cross-encoder has no standalone base embedding");
  }

  // ---- forward pieces ----

  std::vector<std::size_t> ids_of(const TokenSeq& t) const {
    if (t.empty()) throw Error("empty text");
    std::vector<std::size_t> ids;
    ids.reserve(t.size());
    for (const auto& tok : t) ids.push_back(vocab_.index(tok));
    return ids;
  }

  // u = tanh(W mean(E[ids]) + b)
  EncPass enc_forward(int enc, std::vector<std::size_t> ids) const {
    const EncoderIdx& e = encoders_[enc];
    const Param& E = params_[e.emb];
    const Param& W = params_[e.w];
    const Param& b = params_[e.b];
    EncPass pass{enc, std::move(ids), Vec(dims_.d_emb, 0.0), Vec(dims_.d_model)};
    for (std::size_t id : pass.ids)
      for (std::size_t k = 0; k < dims_.d_emb; ++k) pass.m[k] += E.w[id * dims_.d_emb + k];
    const double inv_n = 1.0 / static_cast<double>(pass.ids.size());
    for (double& v : pass.m) v *= inv_n;
    for (std::size_t r = 0; r < dims_.d_model; ++r) {
      double a = b.w[r];
      for (std::size_t k = 0; k < dims_.d_emb; ++k) a += W.w[r * dims_.d_emb + k] * pass.m[k];
      pass.u[r] = std::tanh(a);
    }
    return pass;
  }

  void enc_backward(const EncPass& pass, const Vec& du) {
    const EncoderIdx& e = encoders_[pass.enc];
    Param& E = params_[e.emb];
    Param& W = params_[e.w];
    Param& b = params_[e.b];
    Vec dm(dims_.d_emb, 0.0);
    for (std::size_t r = 0; r < dims_.d_model; ++r) {
      const double da = du[r] * (1.0 - pass.u[r] * pass.u[r]);
      if (da == 0.0) continue;
      b.g[r] += da;
      for (std::size_t k = 0; k < dims_.d_emb; ++k) {
        W.g[r * dims_.d_emb + k] += da * pass.m[k];
        dm[k] += W.w[r * dims_.d_emb + k] * da;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(pass.ids.size());
    for (std::size_t id : pass.ids)
      for (std::size_t k = 0; k < dims_.d_emb; ++k) E.g[id * dims_.d_emb + k] += dm[k] * inv_n;
  }

  static Vec affine(const Param& W, const Param& b, const Vec& x) {
    Vec y(W.rows);
    for (std::size_t r = 0; r < W.rows; ++r) {
      double s = b.w[r];
      for (std::size_t k = 0; k < W.cols; ++k) s += W.w[r * W.cols + k] * x[k];
      y[r] = s;
    }
    return y;
  }

  // Accumulates dW, db and adds W^T dy into dx.
  static void affine_backward(Param& W, Param& b, const Vec& x, const Vec& dy, Vec& dx) {
    for (std::size_t r = 0; r < W.rows; ++r) {
      if (dy[r] == 0.0) continue;
      b.g[r] += dy[r];
      for (std::size_t k = 0; k < W.cols; ++k) {
        W.g[r * W.cols + k] += dy[r] * x[k];
        dx[k] += W.w[r * W.cols + k] * dy[r];
      }
    }
  }

  // Bi-encoder retrieval embeddings are the encoder outputs themselves.
  Vec ret_forward(const Vec& u) const { return ret_w_ < 0 ? u : affine(params_[ret_w_], params_[ret_b_], u); }

  static double softmax_p1(const Vec& logits) {
    const double z = logits[1] - logits[0];
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

  ClsPass cls_forward(const Vec& u, const Vec& v) const {
    ClsPass c;
    c.x = classification_input(u, v);
    const double n = static_cast<double>(c.x.size());
    double mu = 0.0;
    for (double t : c.x) mu += t;
    mu /= n;
    double var = 0.0;
    for (double t : c.x) var += (t - mu) * (t - mu);
    var /= n;
    c.inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    const Param& g = params_[ln_gamma_];
    const Param& be = params_[ln_beta_];
    c.xhat.resize(c.x.size());
    c.y.resize(c.x.size());
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      c.xhat[i] = (c.x[i] - mu) * c.inv_std;
      c.y[i] = g.w[i] * c.xhat[i] + be.w[i];
    }
    c.logits = affine(params_[cls_w_], params_[cls_b_], c.y);
    c.p1 = softmax_p1(c.logits);
    return c;
  }

  // Given dL/dlogits, accumulates head gradients and adds dL/du, dL/dv.
  void cls_backward(const ClsPass& c, const Vec& u, const Vec& v, const Vec& dlogits, Vec& du, Vec& dv) {
    const std::size_t k = c.x.size();
    Vec dy(k, 0.0);
    affine_backward(params_[cls_w_], params_[cls_b_], c.y, dlogits, dy);
    Param& g = params_[ln_gamma_];
    Param& be = params_[ln_beta_];
    Vec dxhat(k);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      g.g[i] += dy[i] * c.xhat[i];
      be.g[i] += dy[i];
      dxhat[i] = dy[i] * g.w[i];
      mean_dxhat += dxhat[i];
      mean_dxhat_xhat += dxhat[i] * c.xhat[i];
    }
    mean_dxhat /= static_cast<double>(k);
    mean_dxhat_xhat /= static_cast<double>(k);
    const std::size_t d = u.size();
    for (std::size_t i = 0; i < k; ++i) {
      const double dx = c.inv_std * (dxhat[i] - mean_dxhat - c.xhat[i] * mean_dxhat_xhat);
      if (i < d) {
        du[i] += dx;
      } else if (i < 2 * d) {
        dv[i - d] += dx;
      } else {
        const std::size_t j = i - 2 * d;
        const double diff = u[j] - v[j];
        const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        du[j] += dx * s;
        dv[j] -= dx * s;
      }
    }
  }

  struct CrossPass {
    EncPass enc;
    Vec logits;
    double p1;
  };

  // One encoder over [point tokens, SEP, candidate tokens].
  CrossPass cross_forward(const TokenSeq& p, const TokenSeq& c) const {
    auto ids = ids_of(p);
    ids.push_back(kSepIndex);
    for (std::size_t id : ids_of(c)) ids.push_back(id);
    CrossPass cp{enc_forward(cls_enc_, std::move(ids)), {}, 0.0};
    cp.logits = affine(params_[cross_w_], params_[cross_b_], cp.enc.u);
    cp.p1 = softmax_p1(cp.logits);
    return cp;
  }

  // Records forward passes of one loss evaluation so encoder passes can be
  // shared between heads and back-propagated once.
  class Graph {
   public:
    explicit Graph(NeuralModel& m) : m_(m) {}

    double triplet(const Triple& t, double margin, double scale) {
      const std::size_t ip = pass(m_.ret_p_, t.point), ipos = pass(m_.ret_c_, t.pos), ineg = pass(m_.ret_c_, t.neg);
      const Vec rp = m_.ret_forward(passes_[ip].u);
      const Vec rpos = m_.ret_forward(passes_[ipos].u);
      const Vec rneg = m_.ret_forward(passes_[ineg].u);
      const double dpos = l2_distance(rp, rpos), dneg = l2_distance(rp, rneg);
      const double loss = triplet_loss(dpos, dneg, margin);
      if (scale == 0.0 || loss <= 0.0) return loss;
      const std::size_t d = rp.size();
      Vec g_p(d, 0.0), g_pos(d, 0.0), g_neg(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        if (dpos > 0.0) {
          const double a = scale * (rp[i] - rpos[i]) / dpos;
          g_p[i] += a;
          g_pos[i] -= a;
        }
        if (dneg > 0.0) {
          const double b = scale * (rp[i] - rneg[i]) / dneg;
          g_p[i] -= b;
          g_neg[i] += b;
        }
      }
      ret_backward(ip, g_p);
      ret_backward(ipos, g_pos);
      ret_backward(ineg, g_neg);
      return loss;
    }

    double ce(const TokenSeq& p, const TokenSeq& c, int label, double scale) {
      if (m_.is_cross()) {
        CrossPass cp = m_.cross_forward(p, c);
        const double loss = cross_entropy(cp.p1, label);
        if (scale == 0.0) return loss;
        const Vec dl = dlogits(cp.p1, label, scale);
        const std::size_t ip = passes_.size();
        passes_.push_back(std::move(cp.enc));
        grads_.emplace_back(m_.dims_.d_model, 0.0);
        keys_.push_back({-1, nullptr});
        affine_backward(m_.params_[m_.cross_w_], m_.params_[m_.cross_b_], passes_[ip].u, dl, grads_[ip]);
        return loss;
      }
      const std::size_t ip = pass(m_.cls_enc_, p), ic = pass(m_.cls_enc_, c);
      const ClsPass cp = m_.cls_forward(passes_[ip].u, passes_[ic].u);
      const double loss = cross_entropy(cp.p1, label);
      if (scale == 0.0) return loss;
      m_.cls_backward(cp, passes_[ip].u, passes_[ic].u, dlogits(cp.p1, label, scale), grads_[ip], grads_[ic]);
      return loss;
    }

    void backward() {
      for (std::size_t i = 0; i < passes_.size(); ++i) m_.enc_backward(passes_[i], grads_[i]);
    }

   private:
    // d CE / d logits = softmax - onehot
    static Vec dlogits(double p1, int label, double scale) {
      return {scale * ((1.0 - p1) - (label == 0 ? 1.0 : 0.0)), scale * (p1 - (label == 1 ? 1.0 : 0.0))};
    }

    std::size_t pass(int enc, const TokenSeq& t) {
      for (std::size_t i = 0; i < passes_.size(); ++i)
        if (keys_[i].first == enc && keys_[i].second == &t) return i;
      passes_.push_back(m_.enc_forward(enc, m_.ids_of(t)));
      grads_.emplace_back(m_.dims_.d_model, 0.0);
      keys_.push_back({enc, &t});
      return passes_.size() - 1;
    }

    void ret_backward(std::size_t i, const Vec& dr) {
      if (m_.ret_w_ < 0) {
        for (std::size_t k = 0; k < dr.size(); ++k) grads_[i][k] += dr[k];
        return;
      }
      affine_backward(m_.params_[m_.ret_w_], m_.params_[m_.ret_b_], passes_[i].u, dr, grads_[i]);
    }

    NeuralModel& m_;
    std::vector<EncPass> passes_;
    std::vector<Vec> grads_;
    std::vector<std::pair<int, const TokenSeq*>> keys_;
  };

  static constexpr double kLayerNormEps = 1e-5;

  Variant variant_ = Variant::kBipolar;
  Vocab vocab_;
  ModelDims dims_;
  RetrievalMetric metric_ = RetrievalMetric::kDot;
  std::vector<Param> params_;
  std::vector<EncoderIdx> encoders_;
  int ret_p_ = -1, ret_c_ = -1, cls_enc_ = -1;
  int ret_w_ = -1, ret_b_ = -1;
  int ln_gamma_ = -1, ln_beta_ = -1, cls_w_ = -1, cls_b_ = -1;
  bool cls_absdiff_ = false;
  int cross_w_ = -1, cross_b_ = -1;
};

inline std::string checkpoint_bytes(const NeuralModel& m) { return m.to_json().dump() + "\n"; }

inline std::uint64_t model_fingerprint(const NeuralModel& m) { return fnv1a64(checkpoint_bytes(m)); }

inline void save_model(const NeuralModel& m, const std::string& path) { write_file(path, checkpoint_bytes(m)); }

inline NeuralModel load_model(const std::string& path) {
  try {
    return NeuralModel::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed neural checkpoint " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const std::vector<Param>& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.emplace_back(p.w.size(), 0.0);
      v_.emplace_back(p.w.size(), 0.0);
    }
  }

  void step(std::vector<Param>& params) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = params[i];
      for (std::size_t k = 0; k < p.w.size(); ++k) {
        const double g = p.g[k];
        m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g;
        v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g * g;
        p.w[k] -= cfg_.lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + cfg_.eps);
        if (!std::isfinite(p.w[k])) throw Error("non-finite parameter after update: " + p.name);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Vec> m_, v_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Negative sampling and training
// ---------------------------------------------------------------------------

enum class Sampling { kRandom, kIncreasingHard };

inline std::string_view to_string(Sampling s) { return s == Sampling::kRandom ? "random" : "increasing_hard"; }

inline Sampling parse_sampling(std::string_view s) {
  if (s == "random") return Sampling::kRandom;
  if (s == "increasing_hard" || s == "increasing-hard") return Sampling::kIncreasingHard;
  throw Error("unknown sampling strategy: \"" + std::string(s) + "\" (expected random|increasing_hard)");
}

inline double hard_probability(std::size_t epoch, double increase_rate) {
  return std::min(static_cast<double>(epoch) * increase_rate, 1.0);
}

// Picks a negative from `pool` (which may contain the gold). With probability
// min(epoch * rate, 1) under increasing_hard, the non-gold member whose
// embedding is nearest to the gold's; otherwise a uniform non-gold member.
// Ties on distance go to the earlier pool entry.
inline std::size_t sample_negative(Sampling strategy, std::size_t epoch, double increase_rate,
                                   const std::vector<std::size_t>& pool, std::size_t gold,
                                   const std::vector<Vec>* embeddings, Rng& rng) {
  std::vector<std::size_t> cands;
  for (std::size_t c : pool)
    if (c != gold) cands.push_back(c);
  if (cands.empty()) throw Error("negative sampling needs a non-gold candidate");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double draw = coin(rng);
  const bool hard = strategy == Sampling::kIncreasingHard && draw < hard_probability(epoch, increase_rate);
  if (!hard) {
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    return cands[pick(rng)];
  }
  if (embeddings == nullptr) throw Error("hard negative sampling needs embeddings");
  const Vec& g = (*embeddings)[gold];
  std::size_t best = cands[0];
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c : cands) {
    const double d = l2_distance((*embeddings)[c], g);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct TrainConfig {
  Variant variant = Variant::kBipolar;
  ModelDims dims;
  std::size_t epochs = 400;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double margin = 1.0;
  std::uint64_t seed = 0;
  // Unset: increasing_hard for bi (it does not converge with random
  // negatives), random for everything else.
  std::optional<Sampling> sampling;
  double increase_rate = 0.02;
  // Pool negatives are drawn from, relative to each training point.
  Setting negative_setting = Setting::kEpa;
  RetrievalMetric retrieval_metric = RetrievalMetric::kDot;
};

inline Sampling effective_sampling(const TrainConfig& cfg) {
  if (cfg.sampling) return *cfg.sampling;
  return cfg.variant == Variant::kBi ? Sampling::kIncreasingHard : Sampling::kRandom;
}

struct TrainedModel {
  NeuralModel model;
  std::vector<double> loss_trace;  // mean sample loss per epoch
};

// Called after every epoch with (epoch, mean loss).
using EpochHook = std::function<void(std::size_t, double)>;

namespace detail {

inline TrainedModel train_single(const Corpus& train, const TrainConfig& cfg, const EpochHook& hook) {
  if (!(cfg.margin > 0.0)) throw Error("margin must be positive");
  if (!(cfg.increase_rate > 0.0 && cfg.increase_rate <= 1.0)) throw Error("increase_rate must be in (0, 1]");
  if (cfg.batch_size == 0) throw Error("batch size must be positive");
  NeuralModel model(cfg.variant, build_vocab(train), cfg.dims, cfg.seed);
  model.set_retrieval_metric(cfg.retrieval_metric);
  const bool pointwise = cfg.variant == Variant::kCross || cfg.variant == Variant::kUnipolarCls;
  const Sampling sampling = effective_sampling(cfg);

  std::vector<TokenSeq> tokens;
  tokens.reserve(train.size());
  for (const auto& a : train.arguments()) tokens.push_back(tokenize(a.full_text()));

  struct Item {
    std::size_t point, gold;
    std::vector<std::size_t> pool;
  };
  std::vector<Item> items;
  for (std::size_t p : train.points()) {
    Item it{p, train.position(*train[p].counter_id), candidate_pool(train, p, cfg.negative_setting)};
    const bool has_negative =
        std::any_of(it.pool.begin(), it.pool.end(), [&](std::size_t c) { return c != it.gold; });
    if (has_negative) items.push_back(std::move(it));
  }
  if (items.empty()) throw Error("empty training data: no point has a negative candidate");

  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  Adam opt(model.params(), AdamConfig{cfg.learning_rate});
  TrainedModel out;
  std::vector<Vec> embeddings;
  struct Sample {
    std::size_t point, pos, neg;
    int label;  // pointwise: candidate in `pos`, label 0/1
  };
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool need_emb = sampling == Sampling::kIncreasingHard && hard_probability(epoch, cfg.increase_rate) > 0.0;
    if (need_emb) {
      embeddings.clear();
      for (const auto& t : tokens) embeddings.push_back(model.sampling_embedding(t));
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Sample> samples;
    for (std::size_t k : order) {
      const Item& it = items[k];
      const std::size_t neg = sample_negative(sampling, epoch, cfg.increase_rate, it.pool, it.gold,
                                              need_emb ? &embeddings : nullptr, rng);
      if (pointwise) {
        samples.push_back({it.point, it.gold, 0, 1});
        samples.push_back({it.point, neg, 0, 0});
      } else {
        samples.push_back({it.point, it.gold, neg, -1});
      }
    }
    if (pointwise) std::shuffle(samples.begin(), samples.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(samples.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      for (std::size_t s = start; s < end; ++s) {
        const Sample& smp = samples[s];
        const double loss =
            pointwise ? model.pair_loss(tokens[smp.point], tokens[smp.pos], smp.label, scale)
                      : model.triple_loss({tokens[smp.point], tokens[smp.pos], tokens[smp.neg]}, cfg.margin, scale);
        if (!std::isfinite(loss))
          throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", point " + train[smp.point].id);
        total += loss;
      }
      opt.step(model.params());
    }
    out.loss_trace.push_back(total / static_cast<double>(samples.size()));
    if (hook) hook(epoch, out.loss_trace.back());
  }
  out.model = std::move(model);
  return out;
}

}  // namespace detail

// Trains one variant on the training corpus. bipolar_no_joint trains a
// unipolar_ret and a unipolar_cls model independently and bundles them; its
// trace is the per-epoch sum of the two.
inline TrainedModel train_model(const Corpus& train, const TrainConfig& cfg, const EpochHook& hook = nullptr) {
  if (cfg.variant != Variant::kBipolarNoJoint) return detail::train_single(train, cfg, hook);
  TrainConfig rc = cfg, cc = cfg;
  rc.variant = Variant::kUnipolarRet;
  cc.variant = Variant::kUnipolarCls;
  cc.seed = cfg.seed + 1;
  TrainedModel ret = detail::train_single(train, rc, nullptr);
  TrainedModel cls = detail::train_single(train, cc, nullptr);
  TrainedModel out{NeuralModel::bundle_no_joint(ret.model, cls.model), {}};
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    out.loss_trace.push_back(ret.loss_trace[e] + cls.loss_trace[e]);
    if (hook) hook(e, out.loss_trace.back());
  }
  return out;
}

inline std::string loss_trace_csv(const std::vector<double>& trace) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < trace.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, trace[e]);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
};

// Central differences on every parameter entry against the analytic gradient
// of triple_loss. Relative error is |a - n| / max(|a|, |n|, floor); the floor
// keeps entries whose gradient is at rounding level from dominating.
inline GradCheckResult grad_check(NeuralModel& model, const Triple& t, double margin = 1.0,
                                  double h = 1e-6, double floor = 1e-3) {
  model.zero_grad();
  model.triple_loss(t, margin, 1.0);
  std::vector<Vec> analytic;
  for (const auto& p : model.params()) analytic.push_back(p.g);
  GradCheckResult r;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    Param& p = model.params()[i];
    for (std::size_t k = 0; k < p.w.size(); ++k) {
      const double orig = p.w[k];
      p.w[k] = orig + h;
      const double fp = model.triple_loss(t, margin);
      p.w[k] = orig - h;
      const double fm = model.triple_loss(t, margin);
      p.w[k] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double a = analytic[i][k];
      const double err = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_param = p.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  return r;
}

}  // namespace counterrank

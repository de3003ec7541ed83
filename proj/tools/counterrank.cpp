// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 usage or validation
// error, 2 runtime failure.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "counterrank/corpus.hpp"
#include "counterrank/eval.hpp"
#include "counterrank/features.hpp"
#include "counterrank/ltr.hpp"
#include "counterrank/neural.hpp"
#include "counterrank/rank.hpp"
#include "counterrank/simplesd.hpp"
#include "counterrank/synthetic.hpp"
#include "counterrank/textrep.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace counterrank;

namespace {

// Bad input detected before any work starts; exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

const char* const kModelNames[] = {"simplesd", "logreg", "gbdt", "bi", "cross", "unipolar-ret", "unipolar-cls",
                                   "bipolar", "bipolar-no-absdiff", "bipolar-no-joint"};

bool is_neural(const std::string& m) { return try_parse_variant(m).has_value(); }
bool is_ltr(const std::string& m) { return m == "logreg" || m == "gbdt"; }

struct RunConfig {
  fs::path corpus, embeddings, word_vectors_text, checkpoint, cache, out;
  std::vector<std::string> models;
  std::vector<Setting> settings{Setting::kEpa};
  std::vector<std::size_t> ks{1};
  std::uint64_t seed = 1;
  std::string split = "test";
  std::string query;

  SyntheticSpec synthetic;
  std::uint32_t synthetic_dim = 16;
  TrainConfig neural;
  std::size_t n_neg = 5;
  std::size_t ltr_features = kNumFeatures;
  LogRegConfig logreg;
  GbdtConfig gbdt;
  LinearWeights simplesd = default_simplesd_weights();
  std::size_t gradcheck_draws = 20;
  double gradcheck_margin = 5.0;
  double gradcheck_tolerance = 1e-4;
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= k == a;
    if (!ok) throw UsageError("unknown config key: " + (where.empty() ? k : where + "." + k));
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key " + where + key + " has the wrong type");
  }
}

std::vector<Setting> parse_settings(const std::string& s) {
  if (s == "all") return {std::begin(kAllSettings), std::end(kAllSettings)};
  std::vector<Setting> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_setting(item));
    } catch (const Error&) {
      throw UsageError("unknown setting: " + item + " (expected sdoc, sda, epc, epa or all)");
    }
  }
  if (out.empty()) throw UsageError("empty --setting");
  return out;
}

std::vector<std::size_t> parse_ks(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty() || v < 1) throw UsageError("invalid K value: '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("empty --k list");
  return out;
}

std::vector<std::string> parse_models(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    bool known = false;
    for (const char* m : kModelNames) known |= item == m;
    if (!known) throw UsageError("unknown model: " + item);
    out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty --model");
  return out;
}

void apply_config_file(RunConfig& rc, const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path.string()));
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  check_keys(j, "", {"corpus", "embeddings", "word_vectors_text", "checkpoint", "cache", "out", "model", "setting",
                     "k", "seed", "split", "query", "synthetic", "neural", "ltr", "logreg", "gbdt", "simplesd",
                     "gradcheck"});
  const fs::path base = path.parent_path();
  auto rel = [&](const char* key, fs::path& out) {
    std::string s;
    read_opt(j, key, s, "");
    if (!s.empty()) out = fs::path(s).is_absolute() ? fs::path(s) : base / s;
  };
  rel("corpus", rc.corpus);
  rel("embeddings", rc.embeddings);
  rel("word_vectors_text", rc.word_vectors_text);
  rel("checkpoint", rc.checkpoint);
  rel("cache", rc.cache);
  rel("out", rc.out);
  if (j.contains("model")) {
    if (j["model"].is_array()) {
      std::string joined;
      for (const auto& m : j["model"]) joined += (joined.empty() ? "" : ",") + m.get<std::string>();
      rc.models = parse_models(joined);
    } else {
      rc.models = parse_models(j["model"].get<std::string>());
    }
  }
  if (j.contains("setting")) {
    if (j["setting"].is_array()) {
      std::string joined;
      for (const auto& s : j["setting"]) joined += (joined.empty() ? "" : ",") + s.get<std::string>();
      rc.settings = parse_settings(joined);
    } else {
      rc.settings = parse_settings(j["setting"].get<std::string>());
    }
  }
  if (j.contains("k")) {
    if (!j["k"].is_array()) throw UsageError("config key k must be an array of integers");
    rc.ks.clear();
    for (const auto& v : j["k"]) {
      if (!v.is_number_integer() || v.get<long long>() < 1) throw UsageError("config key k must hold integers >= 1");
      rc.ks.push_back(v.get<std::size_t>());
    }
    if (rc.ks.empty()) throw UsageError("config key k must not be empty");
  }
  read_opt(j, "seed", rc.seed, "");
  read_opt(j, "split", rc.split, "");
  read_opt(j, "query", rc.query, "");

  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    check_keys(s, "synthetic",
               {"n_debates", "n_themes", "n_aspects", "n_paraphrases", "n_cross_aspect", "n_random", "aspect_vocab",
                "stance_vocab", "filler_vocab", "topic_vocab", "topic_tokens", "stance_tokens", "embedding_dim"});
    auto& p = rc.synthetic;
    read_opt(s, "n_debates", p.n_debates, "synthetic.");
    read_opt(s, "n_themes", p.n_themes, "synthetic.");
    read_opt(s, "n_aspects", p.n_aspects, "synthetic.");
    read_opt(s, "n_paraphrases", p.n_paraphrases, "synthetic.");
    read_opt(s, "n_cross_aspect", p.n_cross_aspect, "synthetic.");
    read_opt(s, "n_random", p.n_random, "synthetic.");
    read_opt(s, "aspect_vocab", p.aspect_vocab, "synthetic.");
    read_opt(s, "stance_vocab", p.stance_vocab, "synthetic.");
    read_opt(s, "filler_vocab", p.filler_vocab, "synthetic.");
    read_opt(s, "topic_vocab", p.topic_vocab, "synthetic.");
    read_opt(s, "topic_tokens", p.topic_tokens, "synthetic.");
    read_opt(s, "stance_tokens", p.stance_tokens, "synthetic.");
    read_opt(s, "embedding_dim", rc.synthetic_dim, "synthetic.");
  }
  if (j.contains("neural")) {
    const json& s = j["neural"];
    check_keys(s, "neural",
               {"epochs", "batch_size", "learning_rate", "margin", "d_emb", "d_model", "sampling", "increase_rate",
                "negative_setting", "retrieval_metric"});
    auto& t = rc.neural;
    read_opt(s, "epochs", t.epochs, "neural.");
    read_opt(s, "batch_size", t.batch_size, "neural.");
    read_opt(s, "learning_rate", t.learning_rate, "neural.");
    read_opt(s, "margin", t.margin, "neural.");
    read_opt(s, "d_emb", t.dims.d_emb, "neural.");
    read_opt(s, "d_model", t.dims.d_model, "neural.");
    read_opt(s, "increase_rate", t.increase_rate, "neural.");
    try {
      if (s.contains("sampling")) t.sampling = parse_sampling(s["sampling"].get<std::string>());
      if (s.contains("negative_setting")) t.negative_setting = parse_setting(s["negative_setting"].get<std::string>());
      if (s.contains("retrieval_metric"))
        t.retrieval_metric = parse_retrieval_metric(s["retrieval_metric"].get<std::string>());
    } catch (const Error& e) {
      throw UsageError(std::string("neural config: ") + e.what());
    }
    if (t.batch_size < 1 || t.dims.d_emb < 1 || t.dims.d_model < 1 || !(t.learning_rate > 0))
      throw UsageError("neural config: batch_size, d_emb, d_model and learning_rate must be positive");
  }
  if (j.contains("ltr")) {
    const json& s = j["ltr"];
    check_keys(s, "ltr", {"n_neg", "features"});
    read_opt(s, "n_neg", rc.n_neg, "ltr.");
    if (rc.n_neg < 1) throw UsageError("ltr.n_neg must be at least 1");
    std::string f = "full";
    read_opt(s, "features", f, "ltr.");
    if (f != "full" && f != "part") throw UsageError("ltr.features must be \"full\" or \"part\"");
    rc.ltr_features = f == "full" ? kNumFeatures : kPartFeatures;
  }
  if (j.contains("logreg")) {
    const json& s = j["logreg"];
    check_keys(s, "logreg", {"C", "max_iter", "balanced", "tol"});
    read_opt(s, "C", rc.logreg.C, "logreg.");
    read_opt(s, "max_iter", rc.logreg.max_iter, "logreg.");
    read_opt(s, "balanced", rc.logreg.balanced, "logreg.");
    read_opt(s, "tol", rc.logreg.tol, "logreg.");
  }
  if (j.contains("gbdt")) {
    const json& s = j["gbdt"];
    check_keys(s, "gbdt",
               {"max_depth", "learning_rate", "n_estimators", "min_child_weight", "subsample", "colsample_bytree",
                "reg_lambda", "scale_pos_weight"});
    auto& g = rc.gbdt;
    read_opt(s, "max_depth", g.max_depth, "gbdt.");
    read_opt(s, "learning_rate", g.learning_rate, "gbdt.");
    read_opt(s, "n_estimators", g.n_estimators, "gbdt.");
    read_opt(s, "min_child_weight", g.min_child_weight, "gbdt.");
    read_opt(s, "subsample", g.subsample, "gbdt.");
    read_opt(s, "colsample_bytree", g.colsample_bytree, "gbdt.");
    read_opt(s, "reg_lambda", g.reg_lambda, "gbdt.");
    read_opt(s, "scale_pos_weight", g.scale_pos_weight, "gbdt.");
  }
  if (j.contains("simplesd")) {
    const json& s = j["simplesd"];
    check_keys(s, "simplesd", {"alpha"});
    try {
      if (s.contains("alpha")) rc.simplesd = weights_from_json(s["alpha"]);
    } catch (const std::exception& e) {
      throw UsageError(std::string("simplesd config: ") + e.what());
    }
  }
  if (j.contains("gradcheck")) {
    const json& s = j["gradcheck"];
    check_keys(s, "gradcheck", {"draws", "margin", "tolerance"});
    read_opt(s, "draws", rc.gradcheck_draws, "gradcheck.");
    read_opt(s, "margin", rc.gradcheck_margin, "gradcheck.");
    read_opt(s, "tolerance", rc.gradcheck_tolerance, "gradcheck.");
  }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string("missing ") + what + " path (set it in --config)");
  if (!fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_out(const fs::path& p) {
  if (p.empty()) throw UsageError("missing --out path");
}

const std::string& single_model(const RunConfig& rc) {
  if (rc.models.size() != 1) throw UsageError("exactly one --model is required for this command");
  return rc.models.front();
}

Setting single_setting(const RunConfig& rc) {
  if (rc.settings.size() != 1) throw UsageError("exactly one --setting is required for this command");
  return rc.settings.front();
}

Corpus part_of(const Corpus& corpus, const std::string& split) {
  if (split == "all") return corpus;
  CorpusSplit s = split_corpus(corpus);
  if (split == "train") return s.train;
  if (split == "validation") return s.validation;
  if (split == "test") return s.test;
  throw UsageError("split must be train, validation, test or all");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_output(const fs::path& out, const std::string& bytes) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out.string(), bytes);
}

TrainConfig neural_config(const RunConfig& rc, const std::string& model) {
  TrainConfig t = rc.neural;
  t.variant = parse_variant(model);
  t.seed = rc.seed;
  return t;
}

LtrModel fit_ltr(const RunConfig& rc, const std::string& model, const Corpus& train, const EmbeddingStore& store,
                 Setting setting) {
  const CorpusFeaturizer fz(train, store);
  const PointwiseDataset ds = build_pointwise_dataset(fz, setting, rc.n_neg, rc.seed);
  LogRegConfig lc = rc.logreg;
  lc.n_features = rc.ltr_features;
  GbdtConfig gc = rc.gbdt;
  gc.n_features = rc.ltr_features;
  gc.seed = rc.seed;
  spdlog::info("training {} on {} rows ({} positive)", model, ds.rows.size(), ds.positives());
  return train_ltr(ds, model == "logreg" ? LtrKind::kLogReg : LtrKind::kGbdt, lc, gc);
}

std::string model_label(const RunConfig& rc, const std::string& model) {
  if (is_ltr(model)) return model + (rc.ltr_features == kNumFeatures ? "-full" : "-part");
  return model;
}

// Hyperparameters that determine a model's output, hashed into reports.
json model_hyperparameters(const RunConfig& rc, const std::string& model, Setting train_setting) {
  json j;
  j["model"] = model;
  j["seed"] = rc.seed;
  if (model == "simplesd") j["alpha"] = std::vector<double>(rc.simplesd.alpha.begin(), rc.simplesd.alpha.end());
  if (is_ltr(model)) {
    j["n_neg"] = rc.n_neg;
    j["features"] = rc.ltr_features;
    j["train_setting"] = std::string(to_string(train_setting));
    if (model == "logreg") j["logreg"] = {rc.logreg.C, rc.logreg.max_iter, rc.logreg.balanced, rc.logreg.tol};
    if (model == "gbdt")
      j["gbdt"] = {rc.gbdt.max_depth,        rc.gbdt.learning_rate,    rc.gbdt.n_estimators,
                   rc.gbdt.min_child_weight, rc.gbdt.subsample,        rc.gbdt.colsample_bytree,
                   rc.gbdt.reg_lambda,       rc.gbdt.scale_pos_weight};
  }
  if (is_neural(model)) {
    const TrainConfig& t = rc.neural;
    j["neural"] = {t.epochs,
                   t.batch_size,
                   t.learning_rate,
                   t.margin,
                   t.dims.d_emb,
                   t.dims.d_model,
                   std::string(to_string(effective_sampling(neural_config(rc, model)))),
                   t.increase_rate,
                   std::string(to_string(t.negative_setting)),
                   std::string(to_string(t.retrieval_metric))};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& rc) {
  require_out(rc.out);
  SyntheticSpec spec = rc.synthetic;
  spec.seed = rc.seed;
  const Corpus corpus = generate_synthetic(spec);
  fs::create_directories(rc.out);
  save_corpus(corpus, (rc.out / "corpus.jsonl").string());
  make_synthetic_store(corpus, rc.synthetic_dim, rc.seed).save((rc.out / "embeddings.embs").string());
  spdlog::info("wrote {} arguments in {} debates to {}", corpus.size(), corpus.debates().size(), rc.out.string());
  std::cout << "corpus " << (rc.out / "corpus.jsonl").string() << "\n"
            << "embeddings " << (rc.out / "embeddings.embs").string() << "\n";
  return kExitOk;
}

int cmd_ingest(const RunConfig& rc) {
  require_path(rc.corpus, "corpus");
  require_out(rc.out);
  if (!rc.word_vectors_text.empty()) require_path(rc.word_vectors_text, "word_vectors_text");
  const Corpus corpus = load_corpus(rc.corpus.string());
  const CorpusSplit split = split_corpus(corpus);
  fs::create_directories(rc.out);
  save_corpus(corpus, (rc.out / "corpus.jsonl").string());
  std::cout << "arguments " << corpus.size() << "\n"
            << "debates " << corpus.debates().size() << "\n"
            << "points " << corpus.points().size() << "\n"
            << "split " << split.train.size() << " " << split.validation.size() << " " << split.test.size() << "\n";
  if (!rc.word_vectors_text.empty()) {
    const EmbeddingStore store = parse_word_vectors_text(read_file(rc.word_vectors_text.string()));
    store.save((rc.out / "embeddings.embs").string());
    std::cout << "vectors " << store.size() << " dim " << store.dim() << "\n";
  }
  return kExitOk;
}

int cmd_featurize(const RunConfig& rc) {
  require_path(rc.corpus, "corpus");
  require_path(rc.embeddings, "embeddings");
  require_out(rc.out);
  const Setting setting = single_setting(rc);
  const Corpus corpus = load_corpus(rc.corpus.string());
  const Corpus part = part_of(corpus, rc.split == "test" ? "train" : rc.split);
  const EmbeddingStore store = load_embedding_store(rc.embeddings.string());
  const CorpusFeaturizer fz(part, store);
  const PointwiseDataset ds = build_pointwise_dataset(fz, setting, rc.n_neg, rc.seed);
  write_output(rc.out, serialize_feature_cache(ds.rows));
  std::cout << "rows " << ds.rows.size() << " positives " << ds.positives() << "\n";
  return kExitOk;
}

int cmd_train_ltr(const RunConfig& rc) {
  const std::string& model = single_model(rc);
  if (!is_ltr(model)) throw UsageError("train-ltr needs --model logreg or gbdt");
  require_path(rc.corpus, "corpus");
  require_path(rc.embeddings, "embeddings");
  require_out(rc.out);
  const Setting setting = single_setting(rc);
  const Corpus corpus = load_corpus(rc.corpus.string());
  const EmbeddingStore store = load_embedding_store(rc.embeddings.string());
  const LtrModel m = fit_ltr(rc, model, split_corpus(corpus).train, store, setting);
  const std::string bytes = ltr_to_json(m).dump() + "\n";
  write_output(rc.out, bytes);
  std::cout << "checkpoint " << rc.out.string() << " fingerprint " << hex64(fnv1a64(bytes)) << "\n";
  return kExitOk;
}

int cmd_train_neural(const RunConfig& rc) {
  const std::string& model = single_model(rc);
  if (!is_neural(model)) throw UsageError("train-neural needs a neural --model");
  require_path(rc.corpus, "corpus");
  require_out(rc.out);
  const Corpus corpus = load_corpus(rc.corpus.string());
  const TrainConfig cfg = neural_config(rc, model);
  const TrainedModel tm = train_model(split_corpus(corpus).train, cfg, [](std::size_t e, double loss) {
    spdlog::debug("epoch {} loss {:.6f}", e, loss);
  });
  write_output(rc.out, checkpoint_bytes(tm.model));
  write_file(rc.out.string() + ".loss.csv", loss_trace_csv(tm.loss_trace));
  std::cout << "checkpoint " << rc.out.string() << " fingerprint " << hex64(model_fingerprint(tm.model)) << "\n";
  return kExitOk;
}

int cmd_index(const RunConfig& rc) {
  require_path(rc.corpus, "corpus");
  require_path(rc.checkpoint, "checkpoint");
  require_out(rc.out);
  const Corpus corpus = part_of(load_corpus(rc.corpus.string()), rc.split);
  const NeuralModel model = load_model(rc.checkpoint.string());
  const EmbeddingCache cache = build_embedding_cache(model, corpus);
  write_output(rc.out, serialize_cache(cache));
  std::cout << "cache " << rc.out.string() << " entries " << cache.size() << " fingerprint " << hex64(cache.fingerprint)
            << "\n";
  return kExitOk;
}

int cmd_search(const RunConfig& rc) {
  if (rc.query.empty()) throw UsageError("search needs --query ID");
  require_path(rc.corpus, "corpus");
  require_path(rc.checkpoint, "checkpoint");
  if (!rc.cache.empty()) require_path(rc.cache, "cache");
  const Setting setting = single_setting(rc);
  const Corpus corpus = part_of(load_corpus(rc.corpus.string()), rc.split);
  const auto point = corpus.find(rc.query);
  if (!point) throw UsageError("query " + rc.query + " is not in the " + rc.split + " split");
  const NeuralModel model = load_model(rc.checkpoint.string());
  const std::size_t k = rc.ks.front();

  RankedList list;
  const TokenSeq q = tokenize(corpus[*point].full_text());
  if (!rc.cache.empty() && model.has_retrieval()) {
    const EmbeddingCache cache = load_cache(rc.cache.string(), model_fingerprint(model));
    const auto rows = pool_rows(cache, corpus, *point, setting);
    list = model.has_classification()
               ? retrieve_and_rerank(model, cache, q, rows, k)
               : retrieve_topk(cache, model.point_retrieval(q), rows, k, model.retrieval_metric());
  } else {
    NeuralRanker ranker(model, corpus);
    list = top_k(ranker(*point, setting, k), k);
  }
  std::string out;
  for (std::size_t r = 0; r < list.size(); ++r) {
    nlohmann::ordered_json j;
    j["rank"] = r + 1;
    j["id"] = list[r].id;
    j["score"] = list[r].score;
    out += j.dump() + "\n";
  }
  if (rc.out.empty()) {
    std::cout << out;
  } else {
    write_output(rc.out, out);
  }
  return kExitOk;
}

int cmd_evaluate(const RunConfig& rc) {
  if (rc.models.empty()) throw UsageError("evaluate needs --model");
  require_path(rc.corpus, "corpus");
  bool needs_store = false, all_trainable = true;
  for (const auto& m : rc.models) {
    needs_store |= !is_neural(m);
    all_trainable &= m != "simplesd";
  }
  if (needs_store) require_path(rc.embeddings, "embeddings");
  if (!rc.checkpoint.empty()) {
    require_path(rc.checkpoint, "checkpoint");
    if (rc.models.size() != 1) throw UsageError("a checkpoint can only be evaluated with a single --model");
    if (!all_trainable) throw UsageError("simplesd takes no checkpoint");
  }

  const Corpus corpus = load_corpus(rc.corpus.string());
  const std::string corpus_hash = hex64(fnv1a64(corpus_to_jsonl(corpus)));
  const Corpus train = split_corpus(corpus).train;
  const Corpus part = part_of(corpus, rc.split);
  std::optional<EmbeddingStore> store;
  std::optional<CorpusFeaturizer> fz;
  if (needs_store) {
    store = load_embedding_store(rc.embeddings.string());
    fz.emplace(part, *store);
  }

  std::vector<EvalReport> reports;
  for (const auto& m : rc.models) {
    EvalReport r;
    // Learned rankers are trained once per setting they are evaluated in.
    if (m == "simplesd") {
      r = evaluate_ranker(model_label(rc, m), part, rc.settings, rc.ks, simplesd_ranker(*fz, rc.simplesd), true);
      r.model_fingerprint = simplesd_fingerprint(rc.simplesd);
    } else if (is_ltr(m)) {
      std::vector<EvalCell> cells;
      for (Setting s : rc.settings) {
        const LtrModel model = rc.checkpoint.empty()
                                   ? fit_ltr(rc, m, train, *store, s)
                                   : ltr_from_json(json::parse(read_file(rc.checkpoint.string())));
        const Setting one[] = {s};
        EvalReport part_report = evaluate_ranker(model_label(rc, m), part, one, rc.ks, classifier_ranker(*fz, model), true);
        cells.push_back(part_report.cells.front());
        r.model = part_report.model;
        r.k_independent = true;
        r.model_fingerprint = ltr_fingerprint(model);
      }
      r.cells = std::move(cells);
    } else {
      NeuralModel model = rc.checkpoint.empty() ? train_model(train, neural_config(rc, m)).model
                                                : load_model(rc.checkpoint.string());
      r = evaluate(model, part, rc.settings, rc.ks);
      r.model = model_label(rc, m);
    }
    json cfg = model_hyperparameters(rc, m, rc.settings.front());
    cfg["corpus"] = corpus_hash;
    cfg["split"] = rc.split;
    if (!rc.checkpoint.empty()) cfg["checkpoint"] = r.model_fingerprint;
    r.config_fingerprint = hex64(fnv1a64(cfg.dump()));
    spdlog::info("evaluated {}", r.model);
    reports.push_back(std::move(r));
  }

  std::cout << format_table(reports);
  if (!rc.out.empty()) write_output(rc.out, reports_to_json(reports, utc_now()).dump(2) + "\n");
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& rc) {
  std::vector<Variant> variants;
  if (rc.models.empty()) {
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  } else {
    for (const auto& m : rc.models) {
      if (!is_neural(m)) throw UsageError("gradcheck applies to neural models only, not " + m);
      variants.push_back(parse_variant(m));
    }
  }
  Corpus corpus;
  if (!rc.corpus.empty()) {
    require_path(rc.corpus, "corpus");
    corpus = load_corpus(rc.corpus.string());
  } else {
    SyntheticSpec spec;
    spec.n_debates = 10;
    spec.seed = rc.seed;
    corpus = generate_synthetic(spec);
  }
  const auto points = corpus.points();
  if (points.empty()) throw UsageError("gradcheck needs a corpus with at least one point");
  const Vocab vocab = build_vocab(corpus);
  std::vector<TokenSeq> toks;
  for (const auto& a : corpus.arguments()) toks.push_back(tokenize(a.full_text()));

  bool ok = true;
  for (Variant v : variants) {
    double worst = 0;
    std::string worst_param;
    for (std::size_t d = 0; d < rc.gradcheck_draws; ++d) {
      Rng rng(rc.seed * 1000003 + d);
      const std::size_t p = points[rng() % points.size()];
      const std::size_t g = corpus.position(*corpus[p].counter_id);
      std::size_t n = rng() % corpus.size();
      while (n == p || n == g) n = (n + 1) % corpus.size();
      NeuralModel model(v, vocab, ModelDims{8, 8}, rc.seed * 7919 + d);
      const GradCheckResult res = grad_check(model, Triple{toks[p], toks[g], toks[n]}, rc.gradcheck_margin);
      if (res.max_rel_error > worst) {
        worst = res.max_rel_error;
        worst_param = res.worst_param;
      }
    }
    const bool pass = worst < rc.gradcheck_tolerance;
    ok &= pass;
    std::printf("%-20s draws %zu max_rel_error %.3e %s%s\n", std::string(to_string(v)).c_str(), rc.gradcheck_draws,
                worst, pass ? "ok" : "FAIL at ", pass ? "" : worst_param.c_str());
  }
  return ok ? kExitOk : kExitRuntime;
}

void configure_logging() {
  auto logger = spdlog::stderr_logger_mt("counterrank");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("COUNTERRANKER_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    throw UsageError("COUNTERRANKER_LOG must be one of error, warn, info, debug (got '" + level + "')");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterrank: counter-argument retrieval and ranking"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  struct Flags {
    std::string config, model, setting, k, seed, out, query;
  } flags;

  using Handler = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"ingest", "Validate a corpus and convert word vectors to the binary store", cmd_ingest},
      {"synth", "Generate a synthetic corpus and embedding store", cmd_synth},
      {"featurize", "Write the pointwise feature cache for the training split", cmd_featurize},
      {"train-ltr", "Train a logistic-regression or boosted-tree ranker", cmd_train_ltr},
      {"train-neural", "Train a neural scoring model", cmd_train_neural},
      {"index", "Build the embedding cache for a checkpoint", cmd_index},
      {"search", "Rank candidates for one query point", cmd_search},
      {"evaluate", "Report accuracy@1 for one or more models", cmd_evaluate},
      {"gradcheck", "Compare analytic and numerical gradients", cmd_gradcheck},
  };
  std::map<CLI::App*, Handler> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON run configuration");
    sub->add_option("--model", flags.model, "Model name, or a comma-separated list for evaluate");
    sub->add_option("--setting", flags.setting, "sdoc, sda, epc, epa, a comma-separated list, or all");
    sub->add_option("--k", flags.k, "Comma-separated shortlist sizes");
    sub->add_option("--seed", flags.seed, "Random seed");
    sub->add_option("--out", flags.out, "Output path");
    sub->add_option("--query", flags.query, "Point id for search");
    handlers[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    configure_logging();
    RunConfig rc;
    if (!flags.config.empty()) apply_config_file(rc, flags.config);
    if (!flags.model.empty()) rc.models = parse_models(flags.model);
    if (!flags.setting.empty()) rc.settings = parse_settings(flags.setting);
    if (!flags.k.empty()) rc.ks = parse_ks(flags.k);
    if (!flags.seed.empty()) {
      std::size_t used = 0;
      try {
        rc.seed = std::stoull(flags.seed, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != flags.seed.size()) throw UsageError("invalid --seed: " + flags.seed);
    }
    if (!flags.out.empty()) rc.out = flags.out;
    if (!flags.query.empty()) rc.query = flags.query;

    for (const auto& [sub, fn] : handlers)
      if (sub->parsed()) return fn(rc);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

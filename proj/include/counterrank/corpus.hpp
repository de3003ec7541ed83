// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterrank/common.hpp"

namespace counterrank {

enum class Stance { kPro, kCon };

inline std::string_view to_string(Stance s) { return s == Stance::kPro ? "pro" : "con"; }

inline Stance parse_stance(std::string_view s) {
  if (s == "pro") return Stance::kPro;
  if (s == "con") return Stance::kCon;
  throw Error("invalid stance: \"" + std::string(s) + "\"");
}

inline Stance opposite(Stance s) { return s == Stance::kPro ? Stance::kCon : Stance::kPro; }

// Candidate filtering settings: same debate opposing counters, same debate
// arguments, entire portal counters, entire portal arguments.
enum class Setting { kSdoc, kSda, kEpc, kEpa };

inline constexpr Setting kAllSettings[] = {Setting::kSdoc, Setting::kSda, Setting::kEpc,
                                           Setting::kEpa};

inline std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::kSdoc: return "sdoc";
    case Setting::kSda: return "sda";
    case Setting::kEpc: return "epc";
    case Setting::kEpa: return "epa";
  }
  return "?";
}

inline Setting parse_setting(std::string_view s) {
  for (Setting v : kAllSettings)
    if (to_string(v) == s) return v;
  throw Error("unknown setting: \"" + std::string(s) + "\" (expected sdoc|sda|epc|epa)");
}

struct Argument {
  std::string id;
  std::string debate_id;
  std::string theme;
  std::string topic;
  Stance stance = Stance::kPro;
  std::string conclusion;
  std::string premise;
  std::optional<std::string> counter_id;

  // The undecomposed text used whenever the argument is a candidate.
  std::string full_text() const { return conclusion + " " + premise; }
};

struct Debate {
  std::string id;
  std::string theme;
  std::string topic;
  std::vector<std::size_t> members;  // positions in Corpus::arguments()
};

// Immutable, validated argument collection. Argument order is preserved.
class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Argument> args) : args_(std::move(args)) { index(); }

  const std::vector<Argument>& arguments() const { return args_; }
  std::size_t size() const { return args_.size(); }
  const Argument& operator[](std::size_t i) const { return args_[i]; }

  // Debates in order of first appearance.
  const std::vector<Debate>& debates() const { return debates_; }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t position(std::string_view id) const {
    auto pos = find(id);
    if (!pos) throw Error("argument not in corpus: " + std::string(id));
    return *pos;
  }

  // True if some argument names this one as its counter.
  bool is_counter(std::size_t i) const { return is_counter_[i]; }

  // Positions of arguments that have a gold counter, in corpus order.
  std::vector<std::size_t> points() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < args_.size(); ++i)
      if (args_[i].counter_id) out.push_back(i);
    return out;
  }

  std::size_t debate_of(std::size_t i) const { return debate_index_[i]; }

 private:
  void index() {
    by_id_.clear();
    debates_.clear();
    std::unordered_map<std::string, std::size_t> debate_pos;
    debate_index_.assign(args_.size(), 0);
    for (std::size_t i = 0; i < args_.size(); ++i) {
      const Argument& a = args_[i];
      auto trimmed_empty = [](const std::string& s) {
        return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
      };
      if (a.id.empty()) throw Error("argument with empty id at position " + std::to_string(i));
      if (trimmed_empty(a.conclusion)) throw Error("argument " + a.id + ": empty conclusion");
      if (trimmed_empty(a.premise)) throw Error("argument " + a.id + ": empty premise");
      if (!by_id_.emplace(a.id, i).second) throw Error("duplicate argument id: " + a.id);
      auto [it, fresh] = debate_pos.emplace(a.debate_id, debates_.size());
      if (fresh) debates_.push_back(Debate{a.debate_id, a.theme, a.topic, {}});
      debates_[it->second].members.push_back(i);
      debate_index_[i] = it->second;
    }
    is_counter_.assign(args_.size(), false);
    for (const Argument& a : args_) {
      if (!a.counter_id) continue;
      auto it = by_id_.find(*a.counter_id);
      if (it == by_id_.end())
        throw Error("argument " + a.id + ": dangling counter_id " + *a.counter_id);
      const Argument& c = args_[it->second];
      if (c.debate_id != a.debate_id)
        throw Error("argument " + a.id + ": counter " + c.id + " is in another debate");
      if (c.stance == a.stance)
        throw Error("argument " + a.id + ": counter " + c.id + " has the same stance");
      is_counter_[it->second] = true;
    }
  }

  std::vector<Argument> args_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<Debate> debates_;
  std::vector<std::size_t> debate_index_;
  std::vector<bool> is_counter_;
};

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

inline Argument argument_from_json(const nlohmann::json& j) {
  static const char* kKeys[] = {"id",     "debate_id",  "theme",   "topic",
                                "stance", "conclusion", "premise", "counter_id"};
  if (!j.is_object()) throw Error("record is not a JSON object");
  for (const char* k : kKeys)
    if (!j.contains(k)) throw Error(std::string("missing key \"") + k + "\"");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* kk : kKeys) known = known || k == kk;
    if (!known) throw Error("unknown key \"" + k + "\"");
  }
  auto str = [&](const char* k) {
    if (!j[k].is_string()) throw Error(std::string("key \"") + k + "\" must be a string");
    return j[k].get<std::string>();
  };
  Argument a;
  a.id = str("id");
  a.debate_id = str("debate_id");
  a.theme = str("theme");
  a.topic = str("topic");
  a.stance = parse_stance(str("stance"));
  a.conclusion = str("conclusion");
  a.premise = str("premise");
  if (!j["counter_id"].is_null()) a.counter_id = str("counter_id");
  return a;
}

inline nlohmann::ordered_json argument_to_json(const Argument& a) {
  nlohmann::ordered_json j;
  j["id"] = a.id;
  j["debate_id"] = a.debate_id;
  j["theme"] = a.theme;
  j["topic"] = a.topic;
  j["stance"] = to_string(a.stance);
  j["conclusion"] = a.conclusion;
  j["premise"] = a.premise;
  if (a.counter_id) {
    j["counter_id"] = *a.counter_id;
  } else {
    j["counter_id"] = nullptr;
  }
  return j;
}

inline Corpus parse_corpus(std::string_view text) {
  std::vector<Argument> args;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      args.push_back(argument_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("malformed record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (args.empty()) throw Error("empty corpus");
  return Corpus(std::move(args));
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw Error("corpus file not found: " + path);
  return parse_corpus(read_file(path));
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const Argument& a : corpus.arguments()) {
    out += argument_to_json(a).dump();
    out += '\n';
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, corpus_to_jsonl(corpus));
}

// ---------------------------------------------------------------------------
// Splitting and candidate pools
// ---------------------------------------------------------------------------

struct CorpusSplit {
  Corpus train;
  Corpus validation;
  Corpus test;
};

// Per theme, debates in corpus order: the first ceil(0.6 D) go to train, the
// next ceil(0.2 D) to validation, the rest to test.
inline CorpusSplit split_corpus(const Corpus& corpus) {
  std::map<std::string, std::vector<std::size_t>> by_theme;  // theme -> debate indices
  for (std::size_t d = 0; d < corpus.debates().size(); ++d)
    by_theme[corpus.debates()[d].theme].push_back(d);

  std::vector<int> part(corpus.debates().size(), 0);
  for (const auto& [theme, debates] : by_theme) {
    const std::size_t n = debates.size();
    const auto n_train = std::min(n, static_cast<std::size_t>(std::ceil(0.6 * n - 1e-9)));
    const auto n_val =
        std::min(n - n_train, static_cast<std::size_t>(std::ceil(0.2 * n - 1e-9)));
    for (std::size_t k = 0; k < n; ++k)
      part[debates[k]] = k < n_train ? 0 : (k < n_train + n_val ? 1 : 2);
  }
  std::vector<Argument> buckets[3];
  for (std::size_t i = 0; i < corpus.size(); ++i)
    buckets[part[corpus.debate_of(i)]].push_back(corpus[i]);
  auto make = [](std::vector<Argument>& v) { return v.empty() ? Corpus() : Corpus(std::move(v)); };
  return CorpusSplit{make(buckets[0]), make(buckets[1]), make(buckets[2])};
}

inline bool in_pool(const Corpus& corpus, std::size_t point, std::size_t cand, Setting setting) {
  if (cand == point) return false;
  const Argument& p = corpus[point];
  const Argument& c = corpus[cand];
  switch (setting) {
    case Setting::kSdoc: return c.debate_id == p.debate_id && c.stance != p.stance;
    case Setting::kSda: return c.debate_id == p.debate_id;
    case Setting::kEpc: return corpus.is_counter(cand);
    case Setting::kEpa: return true;
  }
  return false;
}

// Candidate positions for a point under a setting, in corpus order. The point
// itself is never included.
inline std::vector<std::size_t> candidate_pool(const Corpus& corpus, std::size_t point,
                                               Setting setting) {
  if (point >= corpus.size()) throw Error("point not in corpus");
  std::vector<std::size_t> out;
  if (setting == Setting::kSdoc || setting == Setting::kSda) {
    for (std::size_t c : corpus.debates()[corpus.debate_of(point)].members)
      if (in_pool(corpus, point, c, setting)) out.push_back(c);
    return out;
  }
  for (std::size_t c = 0; c < corpus.size(); ++c)
    if (in_pool(corpus, point, c, setting)) out.push_back(c);
  return out;
}

inline std::vector<std::size_t> candidate_pool(const Corpus& corpus, const Argument& point,
                                               Setting setting) {
  auto pos = corpus.find(point.id);
  if (!pos) throw Error("point not in corpus: " + point.id);
  return candidate_pool(corpus, *pos, setting);
}

}  // namespace counterrank

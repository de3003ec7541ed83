// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "counterrank/common.hpp"

namespace counterrank {

using TokenSeq = std::vector<std::string>;

namespace detail {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode as U+FFFD and consume one byte.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Letters and digits. Outside ASCII this is a block-level approximation:
// punctuation, symbol, and space blocks are excluded, everything else counts.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp == 0xFFFD) return false;
  if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;  // Latin-1 punctuation
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE6F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  if (cp >= 0xFF1A && cp <= 0xFF20) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji
  return true;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if ((cp >= 0xC0 && cp <= 0xDE) && cp != 0xD7) return cp + 32;  // Latin-1
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 32;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;                 // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  if (((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) && cp % 2 == 0 &&
      cp != 0x130)
    return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
  return cp;
}

}  // namespace detail

// Lowercased maximal runs of letters/digits; everything else separates.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = detail::next_code_point(text, i);
    if (detail::is_word_char(cp)) {
      detail::append_utf8(cur, detail::to_lower(cp));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Sparse L1-normalized term frequencies, sorted by token.
struct TfVector {
  std::vector<std::pair<std::string, double>> entries;

  double weight(std::string_view token) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), token,
                               [](const auto& e, std::string_view t) { return e.first < t; });
    return (it != entries.end() && it->first == token) ? it->second : 0.0;
  }
  bool empty() const { return entries.empty(); }
};

inline TfVector term_frequency(const TokenSeq& tokens) {
  if (tokens.empty()) throw Error("term_frequency of an empty token sequence");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  TfVector tf;
  tf.entries.reserve(counts.size());
  const double n = static_cast<double>(tokens.size());
  for (const auto& [t, c] : counts) tf.entries.emplace_back(t, static_cast<double>(c) / n);
  return tf;
}

// ---------------------------------------------------------------------------
// Embedding store
// ---------------------------------------------------------------------------

// Binary layout (little-endian): "EMBS", u32 version=1, u32 dim, u64 count,
// then count x [u16 key_len, key bytes, dim x f32].
class EmbeddingStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  EmbeddingStore() = default;
  explicit EmbeddingStore(std::uint32_t dim) : dim_(dim) {
    if (dim == 0) throw Error("embedding dim must be positive");
  }

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  void add(std::string key, std::vector<float> vec) {
    if (vec.size() != dim_)
      throw Error("vector for \"" + key + "\" has length " + std::to_string(vec.size()) +
                  ", expected " + std::to_string(dim_));
    if (map_.contains(key)) throw Error("duplicate key: " + key);
    keys_.push_back(key);
    map_.emplace(std::move(key), std::move(vec));
  }

  const std::vector<float>* find(std::string_view key) const {
    auto it = map_.find(std::string(key));
    return it == map_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view key) const { return find(key) != nullptr; }

  std::string serialize() const {
    std::string out = "EMBS";
    bin::put<std::uint32_t>(out, kVersion);
    bin::put<std::uint32_t>(out, dim_);
    bin::put<std::uint64_t>(out, keys_.size());
    for (const auto& k : keys_) {
      bin::put_key(out, k);
      for (float v : map_.at(k)) bin::put<float>(out, v);
    }
    return out;
  }

  static EmbeddingStore deserialize(std::string_view bytes) {
    bin::Reader r(bytes, "truncated store");
    if (r.get_bytes(4) != "EMBS") throw Error("bad magic: not an embedding store");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw Error("unsupported store version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>();
    const auto count = r.get<std::uint64_t>();
    EmbeddingStore store(dim);
    for (std::uint64_t n = 0; n < count; ++n) {
      std::string key = r.get_key();
      std::vector<float> vec(dim);
      for (auto& v : vec) v = r.get<float>();
      store.add(std::move(key), std::move(vec));
    }
    if (!r.done()) throw Error("trailing bytes after embedding store payload");
    return store;
  }

  void save(const std::string& path) const { write_file(path, serialize()); }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::vector<float>> map_;
};

inline EmbeddingStore load_embedding_store(const std::string& path) {
  return EmbeddingStore::deserialize(read_file(path));
}

// Conventional word-vector text format: "token v1 ... vdim" per line. An
// optional leading "count dim" header line is skipped.
inline EmbeddingStore parse_word_vectors_text(std::string_view text) {
  EmbeddingStore store;
  bool have_dim = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 &&
        fields[0].find_first_not_of("0123456789") == std::string::npos &&
        fields[1].find_first_not_of("0123456789") == std::string::npos)
      continue;
    if (fields.size() < 2) throw Error("line " + std::to_string(line_no) + ": no vector values");
    std::vector<float> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stof(fields[k], &used));
        if (used != fields[k].size()) throw std::invalid_argument(fields[k]);
      } catch (const std::exception&) {
        throw Error("line " + std::to_string(line_no) + ": bad number \"" + fields[k] + "\"");
      }
    }
    if (!have_dim) {
      store = EmbeddingStore(static_cast<std::uint32_t>(vec.size()));
      have_dim = true;
    } else if (vec.size() != store.dim()) {
      throw Error("line " + std::to_string(line_no) + ": dimension " +
                  std::to_string(vec.size()) + " differs from " + std::to_string(store.dim()));
    }
    if (store.contains(fields[0]))
      throw Error("line " + std::to_string(line_no) + ": duplicate token " + fields[0]);
    store.add(fields[0], std::move(vec));
  }
  if (!have_dim) throw Error("no word vectors found");
  return store;
}

inline std::string doc_key(std::string_view id) { return "doc:" + std::string(id); }

// ---------------------------------------------------------------------------
// Weighted embedding bags
// ---------------------------------------------------------------------------

struct BagEntry {
  std::string token;
  std::span<const float> vec;
  double weight = 0.0;
};

// Views into an EmbeddingStore; the store must outlive the bag.
using EmbeddingBag = std::vector<BagEntry>;

// One entry per distinct in-vocabulary token; weights are term frequencies
// renormalized over the in-vocabulary tokens.
inline EmbeddingBag doc_embedding_bag(const TokenSeq& tokens, const EmbeddingStore& store) {
  EmbeddingBag bag;
  if (tokens.empty()) return bag;
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& t : tokens) {
    if (store.contains(t)) {
      ++counts[t];
      ++total;
    }
  }
  for (const auto& [t, c] : counts) {
    const auto* v = store.find(t);
    bag.push_back(BagEntry{t, std::span<const float>(*v),
                           static_cast<double>(c) / static_cast<double>(total)});
  }
  return bag;
}

// Keeps the `limit` highest-weight entries (ties by token) and renormalizes.
inline EmbeddingBag truncate_bag(EmbeddingBag bag, std::size_t limit) {
  if (bag.size() <= limit) return bag;
  std::stable_sort(bag.begin(), bag.end(), [](const BagEntry& a, const BagEntry& b) {
    return a.weight != b.weight ? a.weight > b.weight : a.token < b.token;
  });
  bag.resize(limit);
  double sum = 0.0;
  for (const auto& e : bag) sum += e.weight;
  for (auto& e : bag) e.weight /= sum;
  std::sort(bag.begin(), bag.end(),
            [](const BagEntry& a, const BagEntry& b) { return a.token < b.token; });
  return bag;
}

}  // namespace counterrank

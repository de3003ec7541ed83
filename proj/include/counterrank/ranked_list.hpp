// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "counterrank/common.hpp"

namespace counterrank {

struct RankedEntry {
  std::string id;
  double score = 0.0;
};

// Candidates by non-increasing score; equal scores ordered by ascending id.
using RankedList = std::vector<RankedEntry>;

inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

inline RankedList make_ranked_list(std::vector<RankedEntry> entries) {
  std::sort(entries.begin(), entries.end(), ranks_before);
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].id == entries[i - 1].id) throw Error("duplicate candidate id " + entries[i].id);
  return entries;
}

// Keeps the first k entries of an already ordered list.
inline RankedList top_k(RankedList list, std::size_t k) {
  if (list.size() > k) list.resize(k);
  return list;
}

}  // namespace counterrank

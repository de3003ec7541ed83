// Copyright 2026 The counterrank Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used only by tests. None of these
// share code paths with the library implementations they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace counterrank::oracle {

// Solves A x = b in place (Gaussian elimination, partial pivoting).
// Returns false if A is singular.
inline bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                         std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-12) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return true;
}

// Minimum of the balanced transportation LP by enumerating every basic
// solution: choose rows+cols-1 cells, solve the equality system restricted to
// them, keep the feasible ones. Exponential; meant for problems up to 4x4.
inline double transport_by_vertex_enumeration(const std::vector<double>& supply,
                                               const std::vector<double>& demand,
                                               const std::vector<double>& cost) {
  const std::size_t n = supply.size(), m = demand.size();
  const std::size_t cells = n * m, basis = n + m - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(cells, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(basis), true);
  // prev_permutation over a sorted-descending selector enumerates all subsets.
  do {
    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < cells; ++k)
      if (pick[k]) chosen.push_back(k);
    // Constraints: all row sums, and the first m-1 column sums (one is redundant).
    std::vector<std::vector<double>> a(basis, std::vector<double>(basis, 0.0));
    std::vector<double> rhs(basis);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = supply[i];
    for (std::size_t j = 0; j + 1 < m; ++j) rhs[n + j] = demand[j];
    for (std::size_t v = 0; v < basis; ++v) {
      const std::size_t i = chosen[v] / m, j = chosen[v] % m;
      a[i][v] = 1.0;
      if (j + 1 < m) a[n + j][v] = 1.0;
    }
    std::vector<double> x;
    if (!solve_linear(a, rhs, x)) continue;
    if (std::any_of(x.begin(), x.end(), [](double v) { return v < -1e-12; })) continue;
    double c = 0.0;
    for (std::size_t v = 0; v < basis; ++v) c += x[v] * cost[chosen[v]];
    best = std::min(best, c);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Indices of `scores` sorted by descending score, ties by ascending id.
template <typename Id>
std::vector<std::size_t> argsort_desc(const std::vector<double>& scores, const std::vector<Id>& ids) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Plain insertion sort keeps this independent of std::sort comparators.
  for (std::size_t i = 1; i < order.size(); ++i) {
    std::size_t k = i;
    while (k > 0) {
      const std::size_t a = order[k - 1], b = order[k];
      const bool swap = scores[b] > scores[a] || (scores[b] == scores[a] && ids[b] < ids[a]);
      if (!swap) break;
      std::swap(order[k - 1], order[k]);
      --k;
    }
  }
  return order;
}

}  // namespace counterrank::oracle

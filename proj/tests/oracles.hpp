#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "qwp/types.hpp"

namespace qwp::test {

// Minimum over all permutations (n <= 8).
inline double brute_force_assignment(const Matrix& cost) {
  std::vector<Index> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < cost.rows(); ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Textbook O(n^3) Hungarian method with row/column potentials (1-based
// arrays). Returns the minimum total cost.
inline double hungarian_cost(const Matrix& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (Index j = 1; j <= n; ++j) total += cost(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

// Transportation optimum for marginals that are integer multiples of 1/units:
// split every source and target into unit copies and solve the assignment.
inline double expanded_transport_cost(const Matrix& cost, const std::vector<int>& a_units,
                                      const std::vector<int>& b_units) {
  std::vector<Index> rows;
  std::vector<Index> cols;
  for (std::size_t i = 0; i < a_units.size(); ++i) rows.insert(rows.end(), static_cast<std::size_t>(a_units[i]), static_cast<Index>(i));
  for (std::size_t j = 0; j < b_units.size(); ++j) cols.insert(cols.end(), static_cast<std::size_t>(b_units[j]), static_cast<Index>(j));
  const auto n = static_cast<Index>(rows.size());
  Matrix expanded(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) expanded(r, c) = cost(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]);
  }
  return hungarian_cost(expanded) / static_cast<double>(n);
}

}  // namespace qwp::test

#include "qwp/assignment.hpp"

#include <algorithm>
#include <limits>
#include <utility>

#include "qwp/error.hpp"

namespace qwp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Auction prices only serve as a starting point for the exact phase, so a
// phase that stalls (price wars on tied costs) is simply cut off.
constexpr double kAuctionFinalFraction = 1e-5;
constexpr double kAuctionScaleStep = 5.0;
constexpr long kAuctionBidsPerRow = 50;

// Forward auction, Gauss-Seidel bidding, min-cost form: row i bids for the
// column minimizing c(i, j) + price(j).
std::vector<double> auction_prices(const double* cost, Index n, double range) {
  std::vector<double> price(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> owner(static_cast<std::size_t>(n));
  std::vector<Index> queue;
  queue.reserve(static_cast<std::size_t>(n));
  const double eps_final = range * kAuctionFinalFraction;
  double eps = range / 4.0;
  while (true) {
    std::fill(owner.begin(), owner.end(), -1);
    queue.clear();
    for (Index i = n - 1; i >= 0; --i) queue.push_back(i);
    long budget = kAuctionBidsPerRow * n;
    while (!queue.empty() && budget-- > 0) {
      const Index i = queue.back();
      queue.pop_back();
      const double* row = cost + i * n;
      double best = kInf;
      double second = kInf;
      Index j_best = 0;
      for (Index j = 0; j < n; ++j) {
        const double h = row[j] + price[static_cast<std::size_t>(j)];
        if (h < second) {
          if (h < best) {
            second = best;
            best = h;
            j_best = j;
          } else {
            second = h;
          }
        }
      }
      price[static_cast<std::size_t>(j_best)] += second - best + eps;
      Index& holder = owner[static_cast<std::size_t>(j_best)];
      if (holder >= 0) queue.push_back(holder);
      holder = i;
    }
    if (!queue.empty() || eps <= eps_final) break;
    eps = std::max(eps / kAuctionScaleStep, eps_final);
  }
  return price;
}

}  // namespace

std::vector<Index> solve_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw DimensionError("solve_assignment: cost matrix must be square");
  if (n > kMaxAssignmentSize) {
    throw ConfigError("solve_assignment: size " + std::to_string(n) + " exceeds cap " + std::to_string(kMaxAssignmentSize));
  }
  if (!cost.allFinite()) throw NumericalError("solve_assignment: non-finite cost");
  if (n == 0) return {};
  if (n == 1) return {0};

  const double* c = cost.data();  // row-major
  const auto sz = static_cast<std::size_t>(n);
  const double range = cost.maxCoeff() - cost.minCoeff();

  // Column potentials v = -price; row potentials u_i = min_j c(i, j) - v_j keep
  // every reduced cost c - u - v nonnegative. Each row takes its argmin column
  // when that column is still free.
  std::vector<double> v(sz, 0.0);
  if (range > 0.0) {
    const std::vector<double> price = auction_prices(c, n, range);
    for (std::size_t j = 0; j < sz; ++j) v[j] = -price[j];
  }
  std::vector<double> u(sz);
  std::vector<Index> col_for_row(sz, -1);
  std::vector<Index> row_for_col(sz, -1);
  for (Index i = 0; i < n; ++i) {
    const double* row = c + i * n;
    double best = kInf;
    Index j_best = 0;
    for (Index j = 0; j < n; ++j) {
      const double h = row[j] - v[static_cast<std::size_t>(j)];
      if (h < best) {
        best = h;
        j_best = j;
      }
    }
    u[static_cast<std::size_t>(i)] = best;
    if (row_for_col[static_cast<std::size_t>(j_best)] < 0) {
      row_for_col[static_cast<std::size_t>(j_best)] = i;
      col_for_row[static_cast<std::size_t>(i)] = j_best;
    }
  }

  // Shortest augmenting path from each free row. Scanned columns get
  // shifted[j] = -inf so they never win again within one search.
  std::vector<double> shifted(sz);
  std::vector<double> dist(sz);
  std::vector<double> settled(sz);
  std::vector<Index> pred(sz);
  std::vector<Index> scanned_cols;
  std::vector<Index> visited_rows;
  scanned_cols.reserve(sz);
  visited_rows.reserve(sz);
  for (Index start = 0; start < n; ++start) {
    if (col_for_row[static_cast<std::size_t>(start)] >= 0) continue;
    std::copy(v.begin(), v.end(), shifted.begin());
    std::fill(dist.begin(), dist.end(), kInf);
    scanned_cols.clear();
    visited_rows.clear();

    double reached = 0.0;
    Index i = start;
    Index sink = -1;
    while (sink < 0) {
      visited_rows.push_back(i);
      const double* row = c + i * n;
      const double base = reached - u[static_cast<std::size_t>(i)];
      double lowest = kInf;
      Index j_low = -1;
      for (std::size_t j = 0; j < sz; ++j) {
        const double r = base + row[j] - shifted[j];
        if (r < dist[j]) {
          dist[j] = r;
          pred[j] = i;
        }
        if (dist[j] < lowest) {
          lowest = dist[j];
          j_low = static_cast<Index>(j);
        }
      }
      const auto jl = static_cast<std::size_t>(j_low);
      reached = lowest;
      settled[jl] = lowest;
      dist[jl] = kInf;
      shifted[jl] = -kInf;
      scanned_cols.push_back(j_low);
      if (row_for_col[jl] < 0) {
        sink = j_low;
      } else {
        i = row_for_col[jl];
      }
    }

    u[static_cast<std::size_t>(start)] += reached;
    for (const Index r : visited_rows) {
      if (r != start) {
        u[static_cast<std::size_t>(r)] += reached - settled[static_cast<std::size_t>(col_for_row[static_cast<std::size_t>(r)])];
      }
    }
    for (const Index j : scanned_cols) v[static_cast<std::size_t>(j)] -= reached - settled[static_cast<std::size_t>(j)];

    Index j = sink;
    while (true) {
      const Index r = pred[static_cast<std::size_t>(j)];
      row_for_col[static_cast<std::size_t>(j)] = r;
      std::swap(col_for_row[static_cast<std::size_t>(r)], j);
      if (r == start) break;
    }
  }
  return col_for_row;
}

double assignment_cost(const Matrix& cost, const std::vector<Index>& col_for_row) {
  double total = 0.0;
  for (std::size_t i = 0; i < col_for_row.size(); ++i) total += cost(static_cast<Index>(i), col_for_row[i]);
  return total;
}

}  // namespace qwp

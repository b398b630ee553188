#include "qwp/quantize.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "qwp/error.hpp"

namespace qwp {

namespace {

struct Nearest {
  std::vector<Index> index;
  std::vector<double> distance;
};

Nearest nearest_centers(const Matrix& points, const Matrix& centers) {
  if (centers.rows() == 0) throw ConfigError("nearest center: no centers");
  if (points.cols() != centers.cols()) throw DimensionError("nearest center: dimension mismatch");
  Nearest result;
  result.index.resize(static_cast<std::size_t>(points.rows()));
  result.distance.resize(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    Index best = 0;
    double best_distance = (centers.row(0) - points.row(i)).squaredNorm();
    for (Index c = 1; c < centers.rows(); ++c) {
      const double d = (centers.row(c) - points.row(i)).squaredNorm();
      if (d < best_distance) {
        best_distance = d;
        best = c;
      }
    }
    result.index[static_cast<std::size_t>(i)] = best;
    result.distance[static_cast<std::size_t>(i)] = best_distance;
  }
  return result;
}

Vector cell_counts(const std::vector<Index>& assignment, Index k) {
  Vector counts = Vector::Zero(k);
  for (Index c : assignment) counts[c] += 1.0;
  return counts;
}

}  // namespace

std::size_t oversample_size(std::size_t k, std::size_t n) {
  if (k == 0 || n == 0) throw ConfigError("oversample_size: k and n must be positive");
  if (k == 1) return std::min(n, k);
  const double kd = static_cast<double>(k);
  const double m = std::ceil(kd * kd * std::log(kd));
  if (m >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(m);
}

Matrix sample_support(const Matrix& points, std::size_t m, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (m > n) throw ConfigError("sample_support: m = " + std::to_string(m) + " exceeds n = " + std::to_string(n));
  if (m == n) return points;
  // Partial Fisher-Yates over row indices.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Matrix sample(static_cast<Index>(m), points.cols());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(order[i], order[j]);
    sample.row(static_cast<Index>(i)) = points.row(order[i]);
  }
  return sample;
}

Seeding kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng) {
  const auto m = static_cast<std::size_t>(points.rows());
  if (k == 0) throw ConfigError("kmeanspp_seed: k must be positive");
  if (k > m) throw ConfigError("kmeanspp_seed: k = " + std::to_string(k) + " exceeds point count " + std::to_string(m));

  Seeding result;
  result.centers.resize(static_cast<Index>(k), points.cols());

  auto first = static_cast<Index>(rng.index(m));
  result.centers.row(0) = points.row(first);
  std::vector<double> min_distance(m);
  for (std::size_t i = 0; i < m; ++i) {
    min_distance[i] = (points.row(static_cast<Index>(i)) - result.centers.row(0)).squaredNorm();
  }

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : min_distance) total += d;

    std::size_t chosen = m;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      std::size_t last_positive = m;
      for (std::size_t i = 0; i < m; ++i) {
        if (min_distance[i] <= 0.0) continue;
        last_positive = i;
        cumulative += min_distance[i];
        if (cumulative > target) {
          chosen = i;
          break;
        }
      }
      if (chosen == m) chosen = last_positive;
    } else {
      chosen = rng.index(m);
      result.padded = true;
    }

    result.centers.row(static_cast<Index>(c)) = points.row(static_cast<Index>(chosen));
    for (std::size_t i = 0; i < m; ++i) {
      const double d = (points.row(static_cast<Index>(i)) - result.centers.row(static_cast<Index>(c))).squaredNorm();
      if (d < min_distance[i]) min_distance[i] = d;
    }
  }
  return result;
}

std::vector<Index> assign_nearest(const Matrix& points, const Matrix& centers) {
  return nearest_centers(points, centers).index;
}

Matrix lloyd_step(const Matrix& points, Matrix centers, int steps) {
  if (centers.rows() == 0) throw ConfigError("lloyd_step: no centers");
  for (int step = 0; step < steps; ++step) {
    const auto assignment = assign_nearest(points, centers);
    Matrix sums = Matrix::Zero(centers.rows(), centers.cols());
    Vector counts = Vector::Zero(centers.rows());
    for (Index i = 0; i < points.rows(); ++i) {
      const Index c = assignment[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      counts[c] += 1.0;
    }
    for (Index c = 0; c < centers.rows(); ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return centers;
}

Vector voronoi_weights(const Matrix& points, const Matrix& centers) {
  if (points.rows() == 0) throw ConfigError("voronoi_weights: no points");
  Vector counts = cell_counts(assign_nearest(points, centers), centers.rows());
  return counts / static_cast<double>(points.rows());
}

int repair_empty_cells(const Matrix& points, Matrix& centers, Vector& weights) {
  const Index k = centers.rows();
  int repairs = 0;
  Nearest nearest = nearest_centers(points, centers);
  Vector counts = cell_counts(nearest.index, k);

  for (Index round = 0; round < k; ++round) {
    Index empty = -1;
    for (Index c = 0; c < k; ++c) {
      if (counts[c] == 0.0) {
        empty = c;
        break;
      }
    }
    if (empty < 0) break;

    std::size_t farthest = 0;
    for (std::size_t i = 1; i < nearest.distance.size(); ++i) {
      if (nearest.distance[i] > nearest.distance[farthest]) farthest = i;
    }
    if (!(nearest.distance[farthest] > 0.0)) break;  // every point sits on a center

    centers.row(empty) = points.row(static_cast<Index>(farthest));
    ++repairs;
    nearest = nearest_centers(points, centers);
    counts = cell_counts(nearest.index, k);
  }

  // Exact duplicates of an occupied center share its mass.
  for (Index c = 0; c < k; ++c) {
    if (counts[c] > 0.0) continue;
    std::vector<Index> group;
    for (Index other = 0; other < k; ++other) {
      if ((centers.row(other) - centers.row(c)).squaredNorm() == 0.0) group.push_back(other);
    }
    double mass = 0.0;
    for (Index member : group) mass += counts[member];
    if (mass <= 0.0) {
      throw NumericalError("repair_empty_cells: center " + std::to_string(c) + " has an empty cell that cannot be repaired");
    }
    for (Index member : group) counts[member] = mass / static_cast<double>(group.size());
  }

  weights = counts / static_cast<double>(points.rows());
  return repairs;
}

double quantization_cost(const Matrix& points, const Matrix& centers) {
  const auto nearest = nearest_centers(points, centers);
  double total = 0.0;
  for (double d : nearest.distance) total += d;
  return total;
}

QuantizedDistribution quantize(const Matrix& points, const QuantizeConfig& config) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (config.k == 0) throw ConfigError("quantize: k must be positive");
  if (config.lloyd_steps < 0) throw ConfigError("quantize: lloyd_steps must be nonnegative");
  if (n < config.k) {
    throw ConfigError("quantize: need at least k = " + std::to_string(config.k) + " points, got " + std::to_string(n));
  }
  if (config.oversample_cap && *config.oversample_cap == 0) throw ConfigError("quantize: oversample_cap must be positive");

  std::size_t m = oversample_size(config.k, n);
  if (config.oversample_cap) m = std::min(m, *config.oversample_cap);
  m = std::max(m, config.k);

  Rng rng(config.seed);
  QuantizedDistribution result;
  const Matrix support = sample_support(points, m, rng);
  auto seeding = kmeanspp_seed(support, config.k, rng);
  result.padded = seeding.padded;
  result.centers = lloyd_step(support, std::move(seeding.centers), config.lloyd_steps);
  result.repairs = repair_empty_cells(support, result.centers, result.weights);
  result.support_size = m;
  return result;
}

}  // namespace qwp

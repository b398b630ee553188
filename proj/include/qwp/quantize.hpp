#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qwp/random.hpp"
#include "qwp/types.hpp"

namespace qwp {

struct QuantizeConfig {
  std::size_t k = 1;
  /// 0 = k-means++ seeding only, 1 = one Lloyd step afterwards.
  int lloyd_steps = 0;
  std::uint64_t seed = 0;
  /// Upper bound on the oversampled support; unset means the whole point set.
  std::optional<std::size_t> oversample_cap;
};

/// k weighted anchors summarizing a point cloud.
struct QuantizedDistribution {
  Matrix centers;
  Vector weights;
  /// Size of the oversampled support the weights were counted on.
  std::size_t support_size = 0;
  /// k-means++ ran out of distinct points and duplicated one.
  bool padded = false;
  /// Number of empty-cell repairs performed.
  int repairs = 0;
};

/// m = min(n, ceil(k^2 ln k)); for k = 1 the guard gives min(n, k).
std::size_t oversample_size(std::size_t k, std::size_t n);

/// m rows uniformly without replacement, in draw order; m == n returns X unchanged.
Matrix sample_support(const Matrix& points, std::size_t m, Rng& rng);

struct Seeding {
  Matrix centers;
  bool padded = false;
};

/// D^2 sampling: first center uniform, then proportional to squared distance to
/// the nearest chosen center.
Seeding kmeanspp_seed(const Matrix& points, std::size_t k, Rng& rng);

/// Lloyd iterations; a center with an empty cell keeps its position.
Matrix lloyd_step(const Matrix& points, Matrix centers, int steps);

/// Index of the nearest center per point (ties go to the lowest index).
std::vector<Index> assign_nearest(const Matrix& points, const Matrix& centers);

/// Normalized cell counts; empty cells get weight 0 (see repair_empty_cells).
Vector voronoi_weights(const Matrix& points, const Matrix& centers);

/// Replaces each zero-weight center by the point farthest from its nearest
/// center, recounting after every replacement (at most k rounds). Centers that
/// still coincide exactly with another center split that cell's mass evenly.
/// Returns the number of replacements; weights are strictly positive afterwards.
int repair_empty_cells(const Matrix& points, Matrix& centers, Vector& weights);

/// sum_i min_j ||x_i - c_j||^2.
double quantization_cost(const Matrix& points, const Matrix& centers);

/// oversample -> k-means++ -> optional Lloyd -> Voronoi weights (on the sample).
QuantizedDistribution quantize(const Matrix& points, const QuantizeConfig& config);

}  // namespace qwp

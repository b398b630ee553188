#pragma once

#include <cstddef>

#include "qwp/types.hpp"

namespace qwp {

/// Squared Euclidean costs between two anchor sets (rows of A against rows of B).
using CostMatrix = Matrix;

struct SinkhornConfig {
  /// Entropic coefficient.
  double epsilon = 0.05;
  int max_iters = 5000;
  /// Balanced: L1 marginal violation. Unbalanced: L-inf change of the log-scalings.
  double tol = 1e-9;
  /// KL relaxation strength for the unbalanced solver.
  double tau = 1.0;

  void validate() const;
};

/// Dual potentials (f, g) of a previous solve; reused to warm-start the next one.
struct Potentials {
  Vector f;
  Vector g;
};

struct TransportPlan {
  Matrix matrix;
  /// ||P 1 - a||_1 and ||P^T 1 - b||_1 at termination.
  double src_marginal_error = 0.0;
  double tgt_marginal_error = 0.0;
  bool converged = false;
  int iterations = 0;
  Potentials potentials;
};

CostMatrix cost_matrix(const Matrix& a, const Matrix& b);

/// Entropic OT: P = diag(u) exp(-C/eps) diag(v), solved by alternating scaling
/// on an absorbed (log-stabilized) kernel. Stops once the row marginal L1
/// violation is <= tol (columns are exact after each sweep).
TransportPlan sinkhorn(const CostMatrix& cost, const Vector& a, const Vector& b, const SinkhornConfig& config,
                       const Potentials* warm_start = nullptr);

/// KL-relaxed marginals: scaling updates raised to tau / (tau + eps).
TransportPlan sinkhorn_unbalanced(const CostMatrix& cost, const Vector& a, const Vector& b,
                                  const SinkhornConfig& config, const Potentials* warm_start = nullptr);

/// Cap on k_a * k_b for the general transportation simplex.
inline constexpr std::size_t kExactOtMaxEntries = 10000;

/// Unregularized OT. Uniform square instances reduce to linear assignment;
/// everything else goes through the transportation simplex (size-capped).
TransportPlan exact_ot(const CostMatrix& cost, const Vector& a, const Vector& b,
                       std::size_t max_entries = kExactOtMaxEntries);

/// <C, P>.
double transport_cost(const CostMatrix& cost, const Matrix& plan);

namespace detail {
/// The transportation simplex path of exact_ot, without the assignment shortcut.
Matrix transportation_simplex(const CostMatrix& cost, const Vector& a, const Vector& b);
}  // namespace detail

}  // namespace qwp

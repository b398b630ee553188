#pragma once

#include "qwp/types.hpp"

namespace qwp {

/// A d x d matrix on the orthogonal group (reflections allowed).
class OrthogonalMap {
 public:
  /// Tolerance on ||W^T W - I||_F enforced at construction.
  static constexpr double kTolerance = 1e-6;

  /// Throws NumericalError if the matrix is not square or not orthogonal.
  explicit OrthogonalMap(Matrix matrix);

  static OrthogonalMap identity(Index dim);

  /// Skips the orthogonality check; used when reading externally produced maps.
  static OrthogonalMap unchecked(Matrix matrix);

  const Matrix& matrix() const { return matrix_; }
  Index dim() const { return matrix_.rows(); }

  /// ||W^T W - I||_F.
  double orthogonality_defect() const;

  /// Row-vector convention: returns points * W.
  Matrix apply(const Matrix& points) const { return points * matrix_; }

 private:
  struct NoCheck {};
  OrthogonalMap(Matrix matrix, NoCheck) : matrix_(std::move(matrix)) {}

  Matrix matrix_;
};

double orthogonality_defect(const Matrix& w);

}  // namespace qwp

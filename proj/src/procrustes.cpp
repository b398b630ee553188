#include "qwp/procrustes.hpp"

#include <Eigen/SVD>

#include "qwp/error.hpp"

namespace qwp {

OrthogonalMap::OrthogonalMap(Matrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw NumericalError("orthogonal map must be square");
  const double defect = qwp::orthogonality_defect(matrix_);
  if (!(defect <= kTolerance)) {
    throw NumericalError("orthogonal map: ||W^T W - I||_F = " + std::to_string(defect) + " exceeds 1e-6");
  }
}

OrthogonalMap OrthogonalMap::identity(Index dim) { return OrthogonalMap(Matrix::Identity(dim, dim), NoCheck{}); }

OrthogonalMap OrthogonalMap::unchecked(Matrix matrix) { return OrthogonalMap(std::move(matrix), NoCheck{}); }

double OrthogonalMap::orthogonality_defect() const { return qwp::orthogonality_defect(matrix_); }

double orthogonality_defect(const Matrix& w) {
  if (w.rows() != w.cols()) return std::numeric_limits<double>::infinity();
  return (w.transpose() * w - Matrix::Identity(w.rows(), w.cols())).norm();
}

OrthogonalMap nearest_orthogonal(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("nearest_orthogonal: matrix must be square");
  if (!m.allFinite()) throw NumericalError("nearest_orthogonal: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("nearest_orthogonal: SVD failed");
  Matrix w = svd.matrixU() * svd.matrixV().transpose();
  return OrthogonalMap(std::move(w));
}

OrthogonalMap procrustes_closed_form(const Matrix& x, const Matrix& y, const std::optional<Vector>& row_weights) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw DimensionError("procrustes: X and Y shapes differ");
  if (x.rows() == 0) throw DimensionError("procrustes: need at least one pair");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("procrustes: non-finite input");
  if (row_weights) {
    if (row_weights->size() != x.rows()) throw DimensionError("procrustes: weight count differs from rows");
    if (!(row_weights->array() > 0.0).all()) throw ConfigError("procrustes: weights must be positive");
    return nearest_orthogonal(x.transpose() * row_weights->asDiagonal() * y);
  }
  return nearest_orthogonal(x.transpose() * y);
}

double alignment_objective(const OrthogonalMap& w, const Matrix& src_anchors, const Matrix& plan,
                           const Matrix& tgt_anchors) {
  const Matrix cross = src_anchors.transpose() * plan * tgt_anchors;
  return (w.matrix().array() * cross.array()).sum();
}

OrthogonalMap coupling_procrustes_update(const OrthogonalMap& w, const Matrix& src_anchors,
                                         const Matrix& tgt_anchors, const Matrix& plan, double learning_rate,
                                         UpdateMode mode) {
  if (src_anchors.rows() != plan.rows() || tgt_anchors.rows() != plan.cols()) {
    throw DimensionError("coupling update: plan shape does not match anchors");
  }
  if (src_anchors.cols() != w.dim() || tgt_anchors.cols() != w.dim()) {
    throw DimensionError("coupling update: anchor dimension does not match map");
  }
  const Matrix cross = src_anchors.transpose() * plan * tgt_anchors;
  if (!cross.allFinite()) throw NumericalError("coupling update: non-finite gradient");
  if (mode == UpdateMode::closed_form) return nearest_orthogonal(cross);
  if (!(learning_rate >= 0.0)) throw ConfigError("coupling update: learning rate must be nonnegative");
  return nearest_orthogonal(w.matrix() + learning_rate * cross);
}

}  // namespace qwp

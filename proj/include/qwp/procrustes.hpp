#pragma once

#include <optional>

#include "qwp/orthogonal_map.hpp"
#include "qwp/types.hpp"

namespace qwp {

/// Nearest orthogonal matrix in Frobenius norm: U V^T from the SVD of m.
OrthogonalMap nearest_orthogonal(const Matrix& m);

/// argmin over orthogonal W of sum_i w_i ||x_i W - y_i||^2, i.e. U V^T where
/// U S V^T = X^T diag(w) Y.
OrthogonalMap procrustes_closed_form(const Matrix& x, const Matrix& y,
                                     const std::optional<Vector>& row_weights = std::nullopt);

enum class UpdateMode { gradient, closed_form };

/// trace(W^T Cx^T P Cy): the coupling-weighted alignment score maximized by
/// every map update.
double alignment_objective(const OrthogonalMap& w, const Matrix& src_anchors, const Matrix& plan,
                           const Matrix& tgt_anchors);

/// gradient:    W <- proj(W + lr * Cx^T P Cy)
/// closed_form: W <- proj(Cx^T P Cy)
OrthogonalMap coupling_procrustes_update(const OrthogonalMap& w, const Matrix& src_anchors,
                                         const Matrix& tgt_anchors, const Matrix& plan, double learning_rate,
                                         UpdateMode mode);

}  // namespace qwp

#pragma once

#include "qwp/embedding_io.hpp"
#include "qwp/types.hpp"

namespace qwp {

/// Rows shorter than this cannot be normalized.
inline constexpr double kMinRowNorm = 1e-12;

/// Unit-normalize rows, subtract the column mean, unit-normalize again;
/// the last two steps repeat until the column mean vanishes.
/// Throws NumericalError naming the token whose row collapses.
EmbeddingMatrix normalize(const EmbeddingMatrix& embeddings);

/// Same pipeline on a bare matrix; errors report the row index.
Matrix normalize(const Matrix& vectors);

/// Scales every row to unit length; throws on rows below kMinRowNorm.
void normalize_rows_in_place(Matrix& vectors);

}  // namespace qwp

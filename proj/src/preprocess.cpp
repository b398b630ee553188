#include "qwp/preprocess.hpp"

#include <functional>
#include <string>

#include "qwp/error.hpp"

namespace qwp {

namespace {

void unit_rows(Matrix& vectors, const char* stage, const std::function<std::string(Index)>& label) {
  for (Index i = 0; i < vectors.rows(); ++i) {
    const double norm = vectors.row(i).norm();
    if (!(norm >= kMinRowNorm)) {
      throw NumericalError(std::string("normalize: ") + stage + ": row " + label(i) +
                           " has norm below 1e-12");
    }
    vectors.row(i) /= norm;
  }
}

// Renormalizing after centering moves the mean off zero again (rows are
// rescaled by different factors), so one pass is not idempotent. Repeating
// center + renormalize converges quickly to rows that are unit length and
// centered at once.
constexpr double kMeanTolerance = 1e-12;
constexpr int kMaxCenterRounds = 100;

Matrix pipeline(Matrix vectors, const std::function<std::string(Index)>& label) {
  unit_rows(vectors, "unit length", label);
  for (int round = 0; round < kMaxCenterRounds; ++round) {
    const Eigen::RowVectorXd mean = vectors.colwise().mean();
    if (round > 0 && mean.norm() <= kMeanTolerance) break;
    vectors.rowwise() -= mean;
    unit_rows(vectors, "after centering", label);
  }
  return vectors;
}

}  // namespace

void normalize_rows_in_place(Matrix& vectors) {
  unit_rows(vectors, "unit length", [](Index i) { return std::to_string(i); });
}

Matrix normalize(const Matrix& vectors) {
  return pipeline(vectors, [](Index i) { return std::to_string(i); });
}

EmbeddingMatrix normalize(const EmbeddingMatrix& embeddings) {
  const auto& vocab = embeddings.vocab();
  auto normalized = pipeline(embeddings.vectors(), [&vocab](Index i) {
    return "'" + vocab[static_cast<std::size_t>(i)] + "'";
  });
  return embeddings.with_vectors(std::move(normalized));
}

}  // namespace qwp

#include "qwp/synthetic.hpp"

#include <Eigen/QR>
#include <numeric>
#include <string>

#include "qwp/error.hpp"
#include "qwp/preprocess.hpp"

namespace qwp {

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Matrix random_orthogonal(Index dim, Rng& rng) {
  const Eigen::MatrixXd g = gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix gaussian_mixture(Index n, Index dim, int clusters, double spread, Rng& rng) {
  if (clusters <= 0) throw ConfigError("gaussian_mixture: clusters must be positive");
  const Matrix means = gaussian_matrix(clusters, dim, rng);
  Matrix points(n, dim);
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<Index>(rng.index(static_cast<std::size_t>(clusters)));
    for (Index j = 0; j < dim; ++j) points(i, j) = means(c, j) + spread * rng.normal();
  }
  return points;
}

SyntheticPair make_synthetic_pair(const SyntheticPairConfig& config) {
  if (config.n <= 0 || config.dim <= 0) throw ConfigError("synthetic pair: n and dim must be positive");
  if (config.shuffle_block <= 0) throw ConfigError("synthetic pair: shuffle_block must be positive");
  Rng rng(config.seed);
  const Matrix x = normalize(gaussian_mixture(config.n, config.dim, config.clusters, config.spread, rng));
  Matrix rotation = random_orthogonal(config.dim, rng);
  Matrix z = x * rotation;
  if (config.noise > 0.0) z += config.noise * gaussian_matrix(config.n, config.dim, rng);

  std::vector<Index> perm(static_cast<std::size_t>(config.n));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index start = 0; start < config.n; start += config.shuffle_block) {
    const Index end = std::min(config.n, start + config.shuffle_block);
    for (Index i = start; i + 1 < end; ++i) {
      const auto j = i + static_cast<Index>(rng.index(static_cast<std::size_t>(end - i)));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
  }

  Matrix y(config.n, config.dim);
  for (Index i = 0; i < config.n; ++i) y.row(perm[static_cast<std::size_t>(i)]) = z.row(i);

  std::vector<std::string> src_vocab;
  std::vector<std::string> tgt_vocab;
  for (Index i = 0; i < config.n; ++i) {
    src_vocab.push_back("s" + std::to_string(i));
    tgt_vocab.push_back("t" + std::to_string(i));
  }
  SyntheticPair pair{EmbeddingMatrix(std::move(src_vocab), x), EmbeddingMatrix(std::move(tgt_vocab), normalize(y)),
                     Lexicon{}, std::move(rotation), perm};
  for (Index i = 0; i < config.n; ++i) {
    pair.gold.add("s" + std::to_string(i), "t" + std::to_string(perm[static_cast<std::size_t>(i)]));
  }
  return pair;
}

std::pair<Matrix, Matrix> make_mixture_pair(Index n, Index dim, Rng& rng) {
  constexpr int kClusters = 3;
  Matrix source = gaussian_mixture(n, dim, kClusters, 0.5, rng);
  Matrix target = gaussian_mixture(n, dim, kClusters, 0.5, rng);
  return {std::move(source), std::move(target)};
}

}  // namespace qwp

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qwp/embedding_io.hpp"
#include "qwp/random.hpp"
#include "qwp/types.hpp"

namespace qwp {

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed).
Matrix random_orthogonal(Index dim, Rng& rng);

/// n points around `clusters` standard-normal means with isotropic spread.
Matrix gaussian_mixture(Index n, Index dim, int clusters, double spread, Rng& rng);

struct SyntheticPairConfig {
  Index n = 3000;
  Index dim = 50;
  int clusters = 20;
  double spread = 0.5;
  /// Per-coordinate Gaussian noise added after rotating (rows are unit length then).
  double noise = 0.01;
  /// The planted permutation only shuffles rows within consecutive blocks, so
  /// frequency-ranked heads keep the same word set on both sides.
  Index shuffle_block = 500;
  std::uint64_t seed = 0;
};

/// Source words s<i>, target words t<j>, with t<perm[i]> the translation of s<i>.
struct SyntheticPair {
  EmbeddingMatrix src;
  EmbeddingMatrix tgt;
  Lexicon gold;
  Matrix rotation;
  std::vector<Index> target_of_source;
};

/// X = normalize(mixture); Y = normalize(permute(X R + noise)).
SyntheticPair make_synthetic_pair(const SyntheticPairConfig& config);

/// Two different Gaussian mixtures of n points each (source, target).
std::pair<Matrix, Matrix> make_mixture_pair(Index n, Index dim, Rng& rng);

}  // namespace qwp

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "qwp/orthogonal_map.hpp"
#include "qwp/retrieval.hpp"
#include "qwp/types.hpp"

namespace qwp {

struct RefineConfig {
  int epochs = 5;
  Retrieval retrieval = Retrieval::csls;
  int csls_knn = 10;
  /// Frequency-ranked window per epoch.
  std::vector<std::size_t> dict_vocab_schedule{5000, 7500, 10000, 12500, 15000};
  bool mutual_only = true;
  int threads = 1;

  void validate() const;
};

using IndexPairs = std::vector<std::pair<Index, Index>>;

/// Synthetic dictionary for a 0-based epoch: within the first
/// schedule[epoch] rows of each side (clamped to what is available), pair each
/// source with its best target, keeping only mutual best matches if requested.
IndexPairs induce_dictionary(const Matrix& x, const Matrix& y, const OrthogonalMap& w, const RefineConfig& config,
                             int epoch);

struct RefineResult {
  OrthogonalMap map;
  std::vector<std::size_t> dictionary_sizes;
};

/// Alternates dictionary induction and closed-form Procrustes on the pairs.
RefineResult refine(const Matrix& x, const Matrix& y, const OrthogonalMap& initial, const RefineConfig& config);

}  // namespace qwp

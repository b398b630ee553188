#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qwp/orthogonal_map.hpp"
#include "qwp/types.hpp"

namespace qwp {

enum class Retrieval { nn, csls };

const char* to_string(Retrieval method);
/// Accepts "nn" or "csls"; throws ConfigError otherwise.
Retrieval parse_retrieval(std::string_view text);

struct RetrievalOptions {
  Retrieval method = Retrieval::nn;
  /// Neighborhood size for the CSLS penalty terms.
  int csls_knn = 10;
  int threads = 1;
};

/// Rows scaled to unit length; zero rows stay zero.
Matrix unit_rows(const Matrix& m);

/// For each query row, the mean of its `knn` largest cosine similarities to
/// `base` rows (rows are assumed unit length).
Vector mean_topk_similarity(const Matrix& queries, const Matrix& base, int knn, int threads = 1);

/// Top `top_k` rows of `y` for each query row of `x` mapped by `w`, ranked by
/// cosine (nn) or 2 cos - r_T(xW) - r_S(y) (csls); ties go to the lower index.
/// CSLS neighborhoods use every row of x*W and y.
std::vector<std::vector<Index>> retrieve(std::span<const Index> query_rows, const Matrix& x, const Matrix& y,
                                         const OrthogonalMap& w, int top_k, const RetrievalOptions& options);

/// Best target per source and best source per target over the full score
/// matrix of two unit-row matrices (ties to the lower index).
struct MutualArgmax {
  std::vector<Index> target_of_source;
  std::vector<Index> source_of_target;
};
MutualArgmax argmax_both_ways(const Matrix& mapped_src_unit, const Matrix& tgt_unit, const RetrievalOptions& options);

}  // namespace qwp

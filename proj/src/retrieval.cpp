#include "qwp/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "qwp/error.hpp"
#include "qwp/parallel.hpp"

namespace qwp {

namespace {

// Keeps a block's score matrix near 32 MB.
std::size_t block_rows(Index columns) {
  constexpr std::size_t kBudget = std::size_t{1} << 22;
  return std::max<std::size_t>(1, kBudget / static_cast<std::size_t>(std::max<Index>(columns, 1)));
}

}  // namespace

const char* to_string(Retrieval method) { return method == Retrieval::nn ? "nn" : "csls"; }

Retrieval parse_retrieval(std::string_view text) {
  if (text == "nn") return Retrieval::nn;
  if (text == "csls") return Retrieval::csls;
  throw ConfigError("unknown retrieval method '" + std::string(text) + "' (expected nn or csls)");
}

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

Vector mean_topk_similarity(const Matrix& queries, const Matrix& base, int knn, int threads) {
  if (knn <= 0) throw ConfigError("csls: knn must be positive");
  if (queries.cols() != base.cols()) throw DimensionError("csls: dimension mismatch");
  Vector result(queries.rows());
  const Index k = std::min<Index>(knn, base.rows());
  if (k == 0) {
    result.setZero();
    return result;
  }
  detail::parallel_for(static_cast<std::size_t>(queries.rows()), block_rows(base.rows()), threads,
                       [&](std::size_t begin, std::size_t end) {
                         const auto rows = static_cast<Index>(end - begin);
                         const Matrix sims = queries.middleRows(static_cast<Index>(begin), rows) * base.transpose();
                         std::vector<double> buffer(static_cast<std::size_t>(base.rows()));
                         for (Index r = 0; r < rows; ++r) {
                           for (Index j = 0; j < sims.cols(); ++j) buffer[static_cast<std::size_t>(j)] = sims(r, j);
                           std::nth_element(buffer.begin(), buffer.begin() + (k - 1), buffer.end(),
                                            std::greater<>());
                           double total = 0.0;
                           for (Index j = 0; j < k; ++j) total += buffer[static_cast<std::size_t>(j)];
                           result[static_cast<Index>(begin) + r] = total / static_cast<double>(k);
                         }
                       });
  return result;
}

std::vector<std::vector<Index>> retrieve(std::span<const Index> query_rows, const Matrix& x, const Matrix& y,
                                         const OrthogonalMap& w, int top_k, const RetrievalOptions& options) {
  if (top_k <= 0) throw ConfigError("retrieve: top_k must be positive");
  if (x.cols() != w.dim() || y.cols() != w.dim()) throw DimensionError("retrieve: dimension mismatch");
  for (Index q : query_rows) {
    if (q < 0 || q >= x.rows()) throw DimensionError("retrieve: query row out of range");
  }

  const Matrix tgt = unit_rows(y);
  Matrix queries(static_cast<Index>(query_rows.size()), x.cols());
  for (std::size_t i = 0; i < query_rows.size(); ++i) queries.row(static_cast<Index>(i)) = x.row(query_rows[i]);
  queries = unit_rows(queries * w.matrix());

  Vector query_penalty = Vector::Zero(queries.rows());
  Vector target_penalty = Vector::Zero(tgt.rows());
  if (options.method == Retrieval::csls) {
    const Matrix mapped = unit_rows(w.apply(x));
    query_penalty = mean_topk_similarity(queries, tgt, options.csls_knn, options.threads);
    target_penalty = mean_topk_similarity(tgt, mapped, options.csls_knn, options.threads);
  }

  const Index keep = std::min<Index>(top_k, tgt.rows());
  std::vector<std::vector<Index>> ranked(query_rows.size());
  detail::parallel_for(query_rows.size(), block_rows(tgt.rows()), options.threads,
                       [&](std::size_t begin, std::size_t end) {
                         const auto rows = static_cast<Index>(end - begin);
                         Matrix scores = queries.middleRows(static_cast<Index>(begin), rows) * tgt.transpose();
                         if (options.method == Retrieval::csls) {
                           scores *= 2.0;
                           scores.colwise() -= query_penalty.segment(static_cast<Index>(begin), rows);
                           scores.rowwise() -= target_penalty.transpose();
                         }
                         std::vector<Index> order(static_cast<std::size_t>(tgt.rows()));
                         for (Index r = 0; r < rows; ++r) {
                           std::iota(order.begin(), order.end(), Index{0});
                           auto better = [&scores, r](Index a, Index b) {
                             const double sa = scores(r, a);
                             const double sb = scores(r, b);
                             return sa > sb || (sa == sb && a < b);
                           };
                           std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
                           ranked[begin + static_cast<std::size_t>(r)].assign(order.begin(), order.begin() + keep);
                         }
                       });
  return ranked;
}

MutualArgmax argmax_both_ways(const Matrix& src, const Matrix& tgt, const RetrievalOptions& options) {
  if (src.cols() != tgt.cols()) throw DimensionError("argmax: dimension mismatch");
  Vector src_penalty = Vector::Zero(src.rows());
  Vector tgt_penalty = Vector::Zero(tgt.rows());
  if (options.method == Retrieval::csls) {
    src_penalty = mean_topk_similarity(src, tgt, options.csls_knn, options.threads);
    tgt_penalty = mean_topk_similarity(tgt, src, options.csls_knn, options.threads);
  }

  MutualArgmax result;
  result.target_of_source.assign(static_cast<std::size_t>(src.rows()), -1);
  result.source_of_target.assign(static_cast<std::size_t>(tgt.rows()), -1);
  std::vector<double> best_for_target(static_cast<std::size_t>(tgt.rows()), -std::numeric_limits<double>::infinity());

  // Blocks are visited in increasing row order so the column argmax keeps the
  // lowest source index on ties.
  const std::size_t chunk = block_rows(tgt.rows());
  for (std::size_t begin = 0; begin < static_cast<std::size_t>(src.rows()); begin += chunk) {
    const std::size_t end = std::min<std::size_t>(static_cast<std::size_t>(src.rows()), begin + chunk);
    const auto rows = static_cast<Index>(end - begin);
    Matrix scores = src.middleRows(static_cast<Index>(begin), rows) * tgt.transpose();
    if (options.method == Retrieval::csls) {
      scores *= 2.0;
      scores.colwise() -= src_penalty.segment(static_cast<Index>(begin), rows);
      scores.rowwise() -= tgt_penalty.transpose();
    }
    for (Index r = 0; r < rows; ++r) {
      Index best = 0;
      for (Index j = 1; j < scores.cols(); ++j) {
        if (scores(r, j) > scores(r, best)) best = j;
      }
      result.target_of_source[begin + static_cast<std::size_t>(r)] = best;
      for (Index j = 0; j < scores.cols(); ++j) {
        if (scores(r, j) > best_for_target[static_cast<std::size_t>(j)]) {
          best_for_target[static_cast<std::size_t>(j)] = scores(r, j);
          result.source_of_target[static_cast<std::size_t>(j)] = static_cast<Index>(begin) + r;
        }
      }
    }
  }
  return result;
}

}  // namespace qwp

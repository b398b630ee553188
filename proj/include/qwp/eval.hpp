#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qwp/embedding_io.hpp"
#include "qwp/orthogonal_map.hpp"
#include "qwp/retrieval.hpp"

namespace qwp {

struct RankedQuery {
  std::string source;
  /// False when the source has no vector (or no in-vocabulary gold); skipped.
  bool in_vocabulary = true;
  std::vector<std::string> ranked_targets;
};

struct EvalReport {
  double p_at_1 = 0.0;
  double map_mrr = 0.0;
  std::size_t n_queries = 0;
  std::size_t n_skipped = 0;
  Retrieval retrieval = Retrieval::nn;
  /// 1-based rank of the best gold translation per scored query, 0 if absent.
  std::vector<int> ranks;

  /// Human-readable lines.
  std::string summary() const;
  /// "key=value" lines: p_at_1, mrr, n_queries, n_skipped, retrieval.
  std::string key_values() const;
};

/// P@1 and MRR (reciprocal rank of the best-ranked gold word within `cap`).
/// Skipped queries count toward n_queries but not the averages.
EvalReport score(std::span<const RankedQuery> queries, const Lexicon& gold, int cap, Retrieval retrieval);

struct EvalOptions {
  RetrievalOptions retrieval;
  int cap = 10;
};

/// Ranks targets for every source in the dictionary file, then scores.
EvalReport evaluate(const EmbeddingMatrix& src, const EmbeddingMatrix& tgt, const OrthogonalMap& w,
                    const LexiconLoad& dictionary, const EvalOptions& options);

}  // namespace qwp

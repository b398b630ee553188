#include "qwp/eval.hpp"

#include <sstream>

#include "qwp/embedding_io.hpp"
#include "qwp/error.hpp"

namespace qwp {

std::string EvalReport::summary() const {
  std::ostringstream out;
  out << "retrieval: " << to_string(retrieval) << '\n'
      << "queries: " << n_queries << " (" << n_skipped << " skipped)\n"
      << "P@1: " << 100.0 * p_at_1 << "%\n"
      << "MRR: " << 100.0 * map_mrr << "%\n";
  return out.str();
}

std::string EvalReport::key_values() const {
  std::ostringstream out;
  out << "p_at_1=" << format_double(p_at_1) << '\n'
      << "mrr=" << format_double(map_mrr) << '\n'
      << "n_queries=" << n_queries << '\n'
      << "n_skipped=" << n_skipped << '\n'
      << "retrieval=" << to_string(retrieval) << '\n';
  return out.str();
}

EvalReport score(std::span<const RankedQuery> queries, const Lexicon& gold, int cap, Retrieval retrieval) {
  if (queries.empty()) throw ConfigError("score: empty query set");
  if (cap <= 0) throw ConfigError("score: cap must be positive");

  EvalReport report;
  report.retrieval = retrieval;
  report.n_queries = queries.size();
  double hits = 0.0;
  double reciprocal = 0.0;
  for (const auto& query : queries) {
    if (!query.in_vocabulary) {
      ++report.n_skipped;
      continue;
    }
    const auto* translations = gold.translations(query.source);
    if (!translations || translations->empty()) {
      throw ConfigError("score: query '" + query.source + "' has no gold translation");
    }
    int rank = 0;
    const auto depth = std::min<std::size_t>(static_cast<std::size_t>(cap), query.ranked_targets.size());
    for (std::size_t r = 0; r < depth; ++r) {
      if (translations->count(query.ranked_targets[r])) {
        rank = static_cast<int>(r) + 1;
        break;
      }
    }
    report.ranks.push_back(rank);
    if (rank == 1) hits += 1.0;
    if (rank > 0) reciprocal += 1.0 / rank;
  }
  const std::size_t scored = report.n_queries - report.n_skipped;
  if (scored > 0) {
    report.p_at_1 = hits / static_cast<double>(scored);
    report.map_mrr = reciprocal / static_cast<double>(scored);
  }
  return report;
}

EvalReport evaluate(const EmbeddingMatrix& src, const EmbeddingMatrix& tgt, const OrthogonalMap& w,
                    const LexiconLoad& dictionary, const EvalOptions& options) {
  std::vector<RankedQuery> queries;
  std::vector<Index> rows;
  std::vector<std::size_t> slots;
  for (const auto& source : dictionary.sources) {
    RankedQuery query{source, false, {}};
    const auto row = src.find(source);
    if (row && dictionary.lexicon.translations(source)) {
      query.in_vocabulary = true;
      rows.push_back(*row);
      slots.push_back(queries.size());
    }
    queries.push_back(std::move(query));
  }

  if (!rows.empty()) {
    const auto ranked = retrieve(rows, src.vectors(), tgt.vectors(), w, options.cap, options.retrieval);
    for (std::size_t q = 0; q < ranked.size(); ++q) {
      auto& targets = queries[slots[q]].ranked_targets;
      for (Index j : ranked[q]) targets.push_back(tgt.vocab()[static_cast<std::size_t>(j)]);
    }
  }
  return score(queries, dictionary.lexicon, options.cap, options.retrieval.method);
}

}  // namespace qwp

#include "qwp/refine.hpp"

#include "qwp/error.hpp"
#include "qwp/procrustes.hpp"

namespace qwp {

void RefineConfig::validate() const {
  if (epochs < 0) throw ConfigError("refine: epochs must be nonnegative");
  if (csls_knn <= 0) throw ConfigError("refine: csls_knn must be positive");
  if (dict_vocab_schedule.size() < static_cast<std::size_t>(epochs)) {
    throw ConfigError("refine: schedule has fewer entries than epochs");
  }
  for (std::size_t i = 0; i < dict_vocab_schedule.size(); ++i) {
    if (dict_vocab_schedule[i] == 0) throw ConfigError("refine: schedule entries must be positive");
    if (i > 0 && dict_vocab_schedule[i] < dict_vocab_schedule[i - 1]) {
      throw ConfigError("refine: schedule must be non-decreasing");
    }
  }
}

IndexPairs induce_dictionary(const Matrix& x, const Matrix& y, const OrthogonalMap& w, const RefineConfig& config,
                             int epoch) {
  config.validate();
  if (epoch < 0 || static_cast<std::size_t>(epoch) >= config.dict_vocab_schedule.size()) {
    throw ConfigError("induce_dictionary: epoch outside the schedule");
  }
  if (x.cols() != w.dim() || y.cols() != w.dim()) throw DimensionError("induce_dictionary: dimension mismatch");

  const std::size_t requested = config.dict_vocab_schedule[static_cast<std::size_t>(epoch)];
  const Index src_rows = std::min<Index>(static_cast<Index>(requested), x.rows());
  const Index tgt_rows = std::min<Index>(static_cast<Index>(requested), y.rows());

  const Matrix mapped = unit_rows(x.topRows(src_rows) * w.matrix());
  const Matrix tgt = unit_rows(y.topRows(tgt_rows));
  const auto best = argmax_both_ways(mapped, tgt, RetrievalOptions{config.retrieval, config.csls_knn, config.threads});

  IndexPairs pairs;
  for (Index i = 0; i < src_rows; ++i) {
    const Index j = best.target_of_source[static_cast<std::size_t>(i)];
    if (config.mutual_only && best.source_of_target[static_cast<std::size_t>(j)] != i) continue;
    pairs.emplace_back(i, j);
  }
  if (pairs.empty()) {
    throw Error("induce_dictionary: no mutual pairs at epoch " + std::to_string(epoch) +
                "; try another retrieval mode or disable mutual filtering");
  }
  return pairs;
}

RefineResult refine(const Matrix& x, const Matrix& y, const OrthogonalMap& initial, const RefineConfig& config) {
  config.validate();
  RefineResult result{initial, {}};
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto pairs = induce_dictionary(x, y, result.map, config, epoch);
    Matrix src(static_cast<Index>(pairs.size()), x.cols());
    Matrix tgt(static_cast<Index>(pairs.size()), y.cols());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      src.row(static_cast<Index>(p)) = x.row(pairs[p].first);
      tgt.row(static_cast<Index>(p)) = y.row(pairs[p].second);
    }
    result.map = procrustes_closed_form(src, tgt);
    result.dictionary_sizes.push_back(pairs.size());
  }
  return result;
}

}  // namespace qwp

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qwp/orthogonal_map.hpp"
#include "qwp/types.hpp"

namespace qwp {

/// Ordered vocabulary plus one vector per token (row i belongs to vocab[i]).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// Throws ConfigError on duplicate tokens, row-count mismatch or non-finite entries.
  EmbeddingMatrix(std::vector<std::string> vocab, Matrix vectors);

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Matrix& vectors() const { return vectors_; }
  std::size_t size() const { return vocab_.size(); }
  Index dim() const { return vectors_.cols(); }

  std::optional<Index> find(std::string_view token) const;

  /// First min(n, size()) rows.
  EmbeddingMatrix head(std::size_t n) const;

  /// Same vocabulary, replaced vectors (shape must match).
  EmbeddingMatrix with_vectors(Matrix vectors) const;

 private:
  std::vector<std::string> vocab_;
  Matrix vectors_;
  std::unordered_map<std::string, Index> index_;
};

/// Multimap from a source token to its gold target translations.
class Lexicon {
 public:
  void add(const std::string& source, const std::string& target);

  const std::map<std::string, std::set<std::string>>& entries() const { return entries_; }
  const std::set<std::string>* translations(const std::string& source) const;
  bool empty() const { return entries_.empty(); }
  std::size_t num_sources() const { return entries_.size(); }
  std::size_t num_pairs() const;

 private:
  std::map<std::string, std::set<std::string>> entries_;
};

struct LexiconLoad {
  Lexicon lexicon;
  std::size_t kept_lines = 0;
  std::size_t dropped_lines = 0;
  /// Every distinct source token in the file, in first-appearance order.
  std::vector<std::string> sources;
};

struct MapLoad {
  OrthogonalMap map;
  double orthogonality_defect = 0.0;
  /// Set when the defect exceeds kMapLoadTolerance.
  bool non_orthogonal = false;
};

inline constexpr double kMapLoadTolerance = 1e-4;

/// Reads the fastText text format ("n d" header, then token + d floats per line).
/// Duplicate tokens after the first are skipped and do not count toward max_vocab.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::size_t max_vocab);

/// Keeps pairs whose source is in src and target is in tgt.
LexiconLoad load_lexicon(const std::filesystem::path& path, const EmbeddingMatrix& src,
                         const EmbeddingMatrix& tgt);

/// Format: "d" then d lines of d values at 17 significant digits.
void save_map(const OrthogonalMap& map, const std::filesystem::path& path);
MapLoad load_map(const std::filesystem::path& path);

/// Writes the fastText text format (used by tools and tests).
void save_embeddings(const EmbeddingMatrix& embeddings, const std::filesystem::path& path);

/// Shortest form is not attempted; always 17 significant digits, which round-trips.
std::string format_double(double value);

}  // namespace qwp

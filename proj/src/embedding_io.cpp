#include "qwp/embedding_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <unordered_set>

#include "qwp/error.hpp"

namespace qwp {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::io: return "io";
    case ParseErrorKind::malformed_header: return "malformed header";
    case ParseErrorKind::field_count: return "wrong field count";
    case ParseErrorKind::non_finite: return "non-finite value";
    case ParseErrorKind::bad_number: return "bad number";
    case ParseErrorKind::empty_vocabulary: return "empty vocabulary";
    case ParseErrorKind::dimension: return "dimension mismatch";
  }
  return "unknown";
}

namespace {

std::string describe(ParseErrorKind kind, const std::string& path, std::size_t line,
                     const std::string& detail) {
  std::ostringstream msg;
  msg << path;
  if (line > 0) msg << ":" << line;
  msg << ": " << to_string(kind);
  if (!detail.empty()) msg << ": " << detail;
  return msg.str();
}

// Splits on runs of the given separators; empty fields are dropped.
std::vector<std::string_view> split(std::string_view text, std::string_view separators) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find_first_not_of(separators, pos);
    if (start == std::string_view::npos) break;
    auto end = text.find_first_of(separators, start);
    if (end == std::string_view::npos) end = text.size();
    fields.push_back(text.substr(start, end - start));
    pos = end;
  }
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if constexpr (std::is_floating_point_v<T>) {
    // Out-of-range literals: overflow becomes inf (reported as non-finite by
    // the caller), underflow keeps the nearest representable value.
    if (ec == std::errc::result_out_of_range && ptr == last) {
      out = static_cast<T>(std::strtod(std::string(field).c_str(), nullptr));
      return true;
    }
  }
  return ec == std::errc() && ptr == last;
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, std::string path, std::size_t line,
                       const std::string& detail)
    : Error(describe(kind, path, line, detail)), kind_(kind), path_(std::move(path)), line_(line) {}

// --- EmbeddingMatrix --------------------------------------------------------

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> vocab, Matrix vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (static_cast<Index>(vocab_.size()) != vectors_.rows()) {
    throw ConfigError("embedding matrix: " + std::to_string(vocab_.size()) + " tokens but " +
                      std::to_string(vectors_.rows()) + " rows");
  }
  if (!vectors_.allFinite()) throw ConfigError("embedding matrix: non-finite entries");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<Index>(i)).second) {
      throw ConfigError("embedding matrix: duplicate token '" + vocab_[i] + "'");
    }
  }
}

std::optional<Index> EmbeddingMatrix::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix EmbeddingMatrix::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::string> vocab(vocab_.begin(), vocab_.begin() + static_cast<std::ptrdiff_t>(n));
  return EmbeddingMatrix(std::move(vocab), vectors_.topRows(static_cast<Index>(n)));
}

EmbeddingMatrix EmbeddingMatrix::with_vectors(Matrix vectors) const {
  if (vectors.rows() != vectors_.rows()) {
    throw DimensionError("with_vectors: row count changed");
  }
  return EmbeddingMatrix(vocab_, std::move(vectors));
}

// --- Lexicon ----------------------------------------------------------------

void Lexicon::add(const std::string& source, const std::string& target) {
  if (source.empty() || target.empty()) throw ConfigError("lexicon: empty token");
  entries_[source].insert(target);
}

const std::set<std::string>* Lexicon::translations(const std::string& source) const {
  auto it = entries_.find(source);
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t Lexicon::num_pairs() const {
  std::size_t total = 0;
  for (const auto& [_, targets] : entries_) total += targets.size();
  return total;
}

// --- Loaders ----------------------------------------------------------------

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::size_t max_vocab) {
  const std::string name = path.string();
  if (max_vocab == 0) throw ConfigError("load_embeddings: max_vocab must be positive");
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io, name, 0, "cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::malformed_header, name, 1, "missing header");
  strip_cr(line);
  const auto header = split(line, " \t");
  long long declared_rows = 0;
  long long dim = 0;
  if (header.size() != 2 || !parse_number(header[0], declared_rows) ||
      !parse_number(header[1], dim) || declared_rows < 0 || dim <= 0) {
    throw ParseError(ParseErrorKind::malformed_header, name, 1, "expected \"n d\"");
  }

  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(declared_rows), max_vocab);
  std::vector<std::string> vocab;
  std::vector<double> values;
  vocab.reserve(limit);
  values.reserve(limit * static_cast<std::size_t>(dim));
  std::unordered_set<std::string> seen;

  std::size_t line_no = 1;
  long long rows_read = 0;
  while (vocab.size() < limit && rows_read < declared_rows && std::getline(in, line)) {
    ++line_no;
    ++rows_read;
    strip_cr(line);
    // Trailing spaces are common in published .vec files; fields are split on runs.
    const auto fields = split(line, " ");
    if (static_cast<long long>(fields.size()) != dim + 1) {
      throw ParseError(ParseErrorKind::field_count, name, line_no,
                       "expected " + std::to_string(dim + 1) + " fields, got " +
                           std::to_string(fields.size()));
    }
    std::string token(fields[0]);
    const std::size_t offset = values.size();
    for (long long j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_number(fields[static_cast<std::size_t>(j + 1)], v)) {
        throw ParseError(ParseErrorKind::bad_number, name, line_no,
                         "cannot parse '" + std::string(fields[static_cast<std::size_t>(j + 1)]) + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(ParseErrorKind::non_finite, name, line_no, "token '" + token + "'");
      }
      values.push_back(v);
    }
    if (!seen.insert(token).second) {
      values.resize(offset);
      continue;
    }
    vocab.push_back(std::move(token));
  }

  if (vocab.empty()) throw ParseError(ParseErrorKind::empty_vocabulary, name, line_no, "no rows read");

  Matrix vectors(static_cast<Index>(vocab.size()), static_cast<Index>(dim));
  std::copy(values.begin(), values.end(), vectors.data());
  return EmbeddingMatrix(std::move(vocab), std::move(vectors));
}

LexiconLoad load_lexicon(const std::filesystem::path& path, const EmbeddingMatrix& src,
                         const EmbeddingMatrix& tgt) {
  const std::string name = path.string();
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io, name, 0, "cannot open file");

  LexiconLoad result;
  std::unordered_set<std::string> seen_sources;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const auto fields = split(line, " \t");
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw ParseError(ParseErrorKind::field_count, name, line_no,
                       "expected 2 fields, got " + std::to_string(fields.size()));
    }
    std::string source(fields[0]);
    std::string target(fields[1]);
    if (seen_sources.insert(source).second) result.sources.push_back(source);
    if (src.find(source) && tgt.find(target)) {
      result.lexicon.add(source, target);
      ++result.kept_lines;
    } else {
      ++result.dropped_lines;
    }
  }
  return result;
}

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                 std::chars_format::general, 17);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buffer, ptr);
}

void save_map(const OrthogonalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(ParseErrorKind::io, path.string(), 0, "cannot open for writing");
  const Matrix& w = map.matrix();
  out << w.rows() << '\n';
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(w(i, j));
    }
    out << '\n';
  }
  if (!out) throw ParseError(ParseErrorKind::io, path.string(), 0, "write failed");
}

MapLoad load_map(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path);
  if (!in) throw ParseError(ParseErrorKind::io, name, 0, "cannot open file");

  std::string line;
  long long dim = 0;
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::malformed_header, name, 1, "missing header");
  strip_cr(line);
  const auto header = split(line, " \t");
  if (header.size() != 1 || !parse_number(header[0], dim) || dim <= 0) {
    throw ParseError(ParseErrorKind::malformed_header, name, 1, "expected \"d\"");
  }

  Matrix w(dim, dim);
  std::size_t line_no = 1;
  for (long long i = 0; i < dim; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(ParseErrorKind::dimension, name, line_no + 1,
                       "expected " + std::to_string(dim) + " rows, got " + std::to_string(i));
    }
    ++line_no;
    strip_cr(line);
    const auto fields = split(line, " \t");
    if (static_cast<long long>(fields.size()) != dim) {
      throw ParseError(ParseErrorKind::dimension, name, line_no,
                       "expected " + std::to_string(dim) + " values, got " + std::to_string(fields.size()));
    }
    for (long long j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_number(fields[static_cast<std::size_t>(j)], v)) {
        throw ParseError(ParseErrorKind::bad_number, name, line_no, std::string(fields[static_cast<std::size_t>(j)]));
      }
      if (!std::isfinite(v)) throw ParseError(ParseErrorKind::non_finite, name, line_no, "");
      w(i, j) = v;
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (!split(line, " \t").empty()) {
      throw ParseError(ParseErrorKind::dimension, name, line_no, "trailing rows after " + std::to_string(dim));
    }
  }

  const double defect = orthogonality_defect(w);
  return MapLoad{OrthogonalMap::unchecked(std::move(w)), defect, defect > kMapLoadTolerance};
}

void save_embeddings(const EmbeddingMatrix& embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(ParseErrorKind::io, path.string(), 0, "cannot open for writing");
  const Matrix& v = embeddings.vectors();
  out << v.rows() << ' ' << v.cols() << '\n';
  for (Index i = 0; i < v.rows(); ++i) {
    out << embeddings.vocab()[static_cast<std::size_t>(i)];
    for (Index j = 0; j < v.cols(); ++j) out << ' ' << format_double(v(i, j));
    out << '\n';
  }
  if (!out) throw ParseError(ParseErrorKind::io, path.string(), 0, "write failed");
}

}  // namespace qwp

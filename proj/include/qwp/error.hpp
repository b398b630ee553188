#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qwp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or dimension disagreement between inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, failed decompositions, degenerate geometry.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  io,
  malformed_header,
  field_count,
  non_finite,
  bad_number,
  empty_vocabulary,
  dimension,
};

const char* to_string(ParseErrorKind kind);

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::string path, std::size_t line, const std::string& detail);

  ParseErrorKind kind() const { return kind_; }
  const std::string& path() const { return path_; }
  /// 1-based; 0 when the error is not tied to a line.
  std::size_t line() const { return line_; }

 private:
  ParseErrorKind kind_;
  std::string path_;
  std::size_t line_;
};

}  // namespace qwp

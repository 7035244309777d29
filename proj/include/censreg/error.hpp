#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace censreg {

// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorKind {
  Parse,        // malformed input cell or row
  Schema,       // missing/invalid column mapping or config field
  Data,         // dataset unusable for the requested estimator
  Domain,       // mean outside the link's valid range
  Singular,     // rank-deficient design or information matrix
  Convergence,  // iteration limit, separation, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error(ErrorKind::Parse, "row " + std::to_string(row) + ": " + what),
        row_(row) {}

  // 1-based data row (header excluded).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(ErrorKind::Schema, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class SingularError : public Error {
 public:
  explicit SingularError(const std::string& what) : Error(ErrorKind::Singular, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate = {},
                   std::string hint = {})
      : Error(ErrorKind::Convergence, what),
        last_iterate_(std::move(last_iterate)),
        hint_(std::move(hint)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

  // e.g. "separation" or "divergence"; empty for a plain iteration-limit stop.
  const std::string& hint() const noexcept { return hint_; }

 private:
  std::vector<double> last_iterate_;
  std::string hint_;
};

}  // namespace censreg

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace uzawa {

using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Entry index outside the declared matrix shape.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A dense conversion or dense oracle would exceed its configured size cap.
class DenseLimitError : public Error {
 public:
  using Error::Error;
};

/// LU factorization met a pivot below the singularity threshold.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, Index pivot_row)
      : Error(what), pivot_row_(pivot_row) {}
  Index pivot_row() const { return pivot_row_; }

 private:
  Index pivot_row_;
};

/// A structural assumption of the saddle point theory does not hold
/// (A_s not positive definite, stabilizing condition failing, C not symmetric).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Malformed Matrix Market content. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        message_(what),
        line_(line) {}
  std::size_t line() const { return line_; }
  /// The message without the line suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uzawa

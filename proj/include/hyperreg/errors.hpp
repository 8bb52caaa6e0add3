#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperreg {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class InvalidMesh : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An element has a non-positive Jacobian determinant at a quadrature point.
class ElementInversion : public Error {
 public:
  explicit ElementInversion(std::size_t element)
      : Error("element " + std::to_string(element) + " inverted (J <= 0)"),
        element_(element) {}
  std::size_t element() const noexcept { return element_; }

 private:
  std::size_t element_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double residual)
      : Error(what + " (last residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(int epoch)
      : Error("training diverged (non-finite loss) at epoch " +
              std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class IncompatibleModel : public Error {
 public:
  using Error::Error;
};

/// Objective evaluation failed (e.g. the forward solve diverged).
class EvaluationFailed : public Error {
 public:
  using Error::Error;
};

class SpecTooAggressive : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperreg

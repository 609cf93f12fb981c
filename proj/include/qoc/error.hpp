#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qoc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not match (operator vs. state, controls vs. grid, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument violates a documented precondition.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// The Chebychev recursion left the normalized spectral interval, or a
/// generator that is not Hermitian was handed to the Chebychev path.
class SpectralRangeError : public Error {
 public:
  using Error::Error;
};

/// A propagation step failed. Carries the interval (1-based) and, when known,
/// the objective index.
class PropagationError : public Error {
 public:
  PropagationError(const std::string& what, std::ptrdiff_t interval,
                   std::ptrdiff_t objective = -1)
      : Error(what), interval_(interval), objective_(objective) {}

  std::ptrdiff_t interval() const noexcept { return interval_; }
  std::ptrdiff_t objective() const noexcept { return objective_; }

 private:
  std::ptrdiff_t interval_;
  std::ptrdiff_t objective_;
};

/// Invalid run configuration; `field()` names the offending JSON path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qoc

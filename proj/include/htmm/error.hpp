#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htmm {

enum class ErrorKind {
  InvalidSpec,
  InvalidPartition,
  NotDiagonalizable,
  ShapeMismatch,
  NotIrreducible,
  DegenerateDiagonal,
  NotLumpable,
  OutOfDomain,
  OutOfConvergenceRegion,
  ComplexSpectrum,
  ConstraintViolation,
  InconsistentQ00,
  InvalidConfig,
  BudgetExceeded,
  InsufficientData,
  SigmaNotPD,
  DegenerateTrace,
  NoConvergence,
  IllConditioned,
  Io,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as this exception; `kind()` identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace htmm

#include "htmm/error.hpp"

namespace htmm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidPartition: return "InvalidPartition";
    case ErrorKind::NotDiagonalizable: return "NotDiagonalizable";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::DegenerateDiagonal: return "DegenerateDiagonal";
    case ErrorKind::NotLumpable: return "NotLumpable";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::OutOfConvergenceRegion: return "OutOfConvergenceRegion";
    case ErrorKind::ComplexSpectrum: return "ComplexSpectrum";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::InconsistentQ00: return "InconsistentQ00";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SigmaNotPD: return "SigmaNotPD";
    case ErrorKind::DegenerateTrace: return "DegenerateTrace";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace htmm

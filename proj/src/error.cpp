#include "plnspatial/error.hpp"

namespace plnspatial {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::NotOnCircle: return "NotOnCircle";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::MissingCovariate: return "MissingCovariate";
    case ErrorKind::EmptyShore: return "EmptyShore";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NonFiniteLinearPredictor: return "NonFiniteLinearPredictor";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::InsufficientChains: return "InsufficientChains";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

bool Error::is_numerical() const noexcept {
  switch (kind_) {
    case ErrorKind::NotPositiveDefinite:
    case ErrorKind::NonFiniteLinearPredictor:
    case ErrorKind::SingularCovariance:
    case ErrorKind::DegenerateVariance:
    case ErrorKind::RankDeficientDesign:
    case ErrorKind::NumericalFailure:
    case ErrorKind::DegenerateConfiguration:
      return true;
    default:
      return false;
  }
}

}  // namespace plnspatial

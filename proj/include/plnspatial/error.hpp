#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plnspatial {

enum class ErrorKind {
  InvalidArgument,
  DegenerateConfiguration,
  ZeroNorm,
  NotOnCircle,
  CoincidentPoints,
  MissingCovariate,
  EmptyShore,
  NotPositiveDefinite,
  NonFiniteLinearPredictor,
  SingularCovariance,
  InsufficientChains,
  DegenerateVariance,
  RankDeficientDesign,
  ParseError,
  SchemaError,
  IoError,
  NumericalFailure,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Numerical kinds map to CLI exit code 2; everything else is a usage/input error.
  bool is_numerical() const noexcept;

 private:
  ErrorKind kind_;
};

}  // namespace plnspatial

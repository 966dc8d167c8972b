#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace safectl {

enum class ErrorKind {
  // numeric kernels
  NonSquare,
  NumericalFailure,
  AsymmetricInput,
  UnstableF,
  Overflow,
  InvalidTolerance,
  // plant model
  NonPositiveDt,
  DimensionMismatch,
  UnstableClosedLoop,
  StateOverflow,
  AssumptionViolation,
  UnstabilizableModel,
  // Riccati machinery
  GammaInfeasible,
  UnstableGain,
  NonConvergence,
  SingularInnerMatrix,
  InfeasibleInit,
  CertificateFailure,
  // online loop
  CostBoundViolation,
  InsufficientTrace,
  HorizonBelowBurnIn,
  NonPositiveParameter,
  // adversary
  DosRequiresIdentityD,
  InadmissibleBase,
  InvalidConfig,
  // files
  ParseError,
  SchemaError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace safectl

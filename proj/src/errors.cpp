#include "safectl/errors.hpp"

namespace safectl {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::AsymmetricInput: return "AsymmetricInput";
    case ErrorKind::UnstableF: return "UnstableF";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::InvalidTolerance: return "InvalidTolerance";
    case ErrorKind::NonPositiveDt: return "NonPositiveDt";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnstableClosedLoop: return "UnstableClosedLoop";
    case ErrorKind::StateOverflow: return "StateOverflow";
    case ErrorKind::AssumptionViolation: return "AssumptionViolation";
    case ErrorKind::UnstabilizableModel: return "UnstabilizableModel";
    case ErrorKind::GammaInfeasible: return "GammaInfeasible";
    case ErrorKind::UnstableGain: return "UnstableGain";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularInnerMatrix: return "SingularInnerMatrix";
    case ErrorKind::InfeasibleInit: return "InfeasibleInit";
    case ErrorKind::CertificateFailure: return "CertificateFailure";
    case ErrorKind::CostBoundViolation: return "CostBoundViolation";
    case ErrorKind::InsufficientTrace: return "InsufficientTrace";
    case ErrorKind::HorizonBelowBurnIn: return "HorizonBelowBurnIn";
    case ErrorKind::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorKind::DosRequiresIdentityD: return "DosRequiresIdentityD";
    case ErrorKind::InadmissibleBase: return "InadmissibleBase";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace safectl

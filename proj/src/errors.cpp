#include "goursat/errors.hpp"

namespace goursat {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::JetOrderOverflow: return "JetOrderOverflow";
    case ErrorCode::RankDeficientDatum: return "RankDeficientDatum";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::SingularPoint: return "SingularPoint";
    case ErrorCode::NotGoursatType: return "NotGoursatType";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::OrthogonalityViolation: return "OrthogonalityViolation";
    case ErrorCode::NonTransversal: return "NonTransversal";
    case ErrorCode::ZeroField: return "ZeroField";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::DatumNotOnEquation: return "DatumNotOnEquation";
    case ErrorCode::CharacteristicDatum: return "CharacteristicDatum";
    case ErrorCode::NoRelationFound: return "NoRelationFound";
    case ErrorCode::SideMismatch: return "SideMismatch";
    case ErrorCode::NotFirstIntegral: return "NotFirstIntegral";
    case ErrorCode::NonGraphicalPatch: return "NonGraphicalPatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace goursat

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace goursat {

enum class ErrorCode {
  SyntaxError,
  UnknownVariable,
  UnboundVariable,
  DomainError,
  JetOrderOverflow,
  RankDeficientDatum,
  NewtonDivergence,
  SingularPoint,
  NotGoursatType,
  InsufficientSamples,
  OrthogonalityViolation,
  NonTransversal,
  ZeroField,
  NonFiniteState,
  DatumNotOnEquation,
  CharacteristicDatum,
  NoRelationFound,
  SideMismatch,
  NotFirstIntegral,
  NonGraphicalPatch,
  InvalidArgument,
  SchemaError,
  IoError,
};

std::string_view error_code_name(ErrorCode code);

// Numeric diagnostics travel with the error so the CLI can surface them.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::pair<std::string, double>> details = {})
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const { return code_; }
  const std::vector<std::pair<std::string, double>>& details() const { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::pair<std::string, double>> details_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& what)
      : Error(ErrorCode::SyntaxError,
              "syntax error at position " + std::to_string(position) + ": " + what,
              {{"position", static_cast<double>(position)}}),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace goursat

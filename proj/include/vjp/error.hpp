#pragma once

#include <stdexcept>
#include <string>

namespace vjp {

enum class ErrorCode {
  // input errors (exit 2)
  Syntax,
  UnknownCoordinate,
  JetOrderExceeded,
  Schema,
  // mathematical precondition failures (exit 3)
  DivisionByZero,
  NonPolynomialInT,
  HelmholtzFailed,
  NotVariationallyTrivial,
  UnsupportedOrder,
  InconsistentSourceForm,
  MissingOverlap,
  NoRepresentative,
  CycleNotClosed,
  SectionNotGlobal,
  NotASymmetry,
  PreconditionFailed,
  PropositionViolated,
  // numerical failures (exit 4)
  Undecidable,
  NonConvergence,
  IntegratorFailure,
};

const char* error_code_name(ErrorCode code);

/// Process exit code associated with an error category.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int position = -1)
      : std::runtime_error(message), code_(code), position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  /// Byte offset into parsed text, or -1 when not applicable.
  int position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  int position_;
};

}  // namespace vjp

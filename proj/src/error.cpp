#include "vjp/error.hpp"

namespace vjp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::UnknownCoordinate: return "unknown-coordinate";
    case ErrorCode::JetOrderExceeded: return "jet-order-exceeded";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::DivisionByZero: return "division-by-zero";
    case ErrorCode::NonPolynomialInT: return "non-polynomial-in-t";
    case ErrorCode::HelmholtzFailed: return "helmholtz-failed";
    case ErrorCode::NotVariationallyTrivial: return "not-variationally-trivial";
    case ErrorCode::UnsupportedOrder: return "unsupported-order";
    case ErrorCode::InconsistentSourceForm: return "inconsistent-source-form";
    case ErrorCode::MissingOverlap: return "missing-overlap";
    case ErrorCode::NoRepresentative: return "no-representative";
    case ErrorCode::CycleNotClosed: return "cycle-not-closed";
    case ErrorCode::SectionNotGlobal: return "section-not-global";
    case ErrorCode::NotASymmetry: return "not-a-symmetry";
    case ErrorCode::PreconditionFailed: return "precondition-failed";
    case ErrorCode::PropositionViolated: return "proposition-violated";
    case ErrorCode::Undecidable: return "undecidable";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::IntegratorFailure: return "integrator-failure";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax:
    case ErrorCode::UnknownCoordinate:
    case ErrorCode::JetOrderExceeded:
    case ErrorCode::Schema:
      return 2;
    case ErrorCode::Undecidable:
    case ErrorCode::NonConvergence:
    case ErrorCode::IntegratorFailure:
      return 4;
    default:
      return 3;
  }
}

}  // namespace vjp

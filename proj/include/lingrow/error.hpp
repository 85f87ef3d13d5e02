#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lingrow {

enum class Errc {
  NonFiniteEvaluation,
  ToleranceNotMet,
  BracketInvalid,
  InvalidParameter,
  NotStrictlyConvex,
  NotLinearGrowth,
  InconsistentWithCriterion,
  CriterionDiverges,
  CriterionConverges,
  DegenerateGradient,
  NotFound,
  BudgetExhausted,
  MeshTooCoarse,
  NewtonStalled,
  InvalidConfig,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case Errc::ToleranceNotMet: return "ToleranceNotMet";
    case Errc::BracketInvalid: return "BracketInvalid";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::NotStrictlyConvex: return "NotStrictlyConvex";
    case Errc::NotLinearGrowth: return "NotLinearGrowth";
    case Errc::InconsistentWithCriterion: return "InconsistentWithCriterion";
    case Errc::CriterionDiverges: return "CriterionDiverges";
    case Errc::CriterionConverges: return "CriterionConverges";
    case Errc::DegenerateGradient: return "DegenerateGradient";
    case Errc::NotFound: return "NotFound";
    case Errc::BudgetExhausted: return "BudgetExhausted";
    case Errc::MeshTooCoarse: return "MeshTooCoarse";
    case Errc::NewtonStalled: return "NewtonStalled";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lingrow

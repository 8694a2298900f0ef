#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wcps {

enum class ErrorKind {
  kInvalidInput,
  kDiverged,
  kConditioning,
  kUncontrollable,
  kInfeasible,
  kNumerical,
  kBracket,
  kAnalysis,
  kContractViolation,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kDiverged: return "diverged";
    case ErrorKind::kConditioning: return "ill-conditioned";
    case ErrorKind::kUncontrollable: return "uncontrollable";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kBracket: return "bracket";
    case ErrorKind::kAnalysis: return "analysis";
    case ErrorKind::kContractViolation: return "contract violation";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so front ends can map
// it onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace wcps

#pragma once

#include <stdexcept>
#include <string>

namespace bayesij {

enum class ErrorCode {
  InvalidInput,
  SingularInformation,
  NotPSD,
  NumericalFailure,
  Unsupported,
  ParseError,
  UsageError,
  DegenerateWeights,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::SingularInformation: return "SingularInformation";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidInput, what);
}

}  // namespace bayesij

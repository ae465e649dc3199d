#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace findview {

enum class ErrorCode {
  InvalidFov,
  InvalidSize,
  LengthMismatch,
  InvalidSeverity,
  UnknownCorruption,
  InvalidSpec,
  MissingPanorama,
  StepAfterDone,
  InfeasibleDifficulty,
  OffGrid,
  EmptyInput,
  EmptyDirectory,
  BadAspect,
  SizeMismatch,
  ProtocolViolation,
  BindFailure,
  Io,
  Parse,
  ContractViolation,
  AgentCrash,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace findview

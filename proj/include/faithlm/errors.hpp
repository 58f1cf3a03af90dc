#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faithlm {

enum class ErrorCode {
  InvalidArgument,
  NoChoiceMatched,
  AmbiguousAnswer,
  BackendUnavailable,
  ScriptExhausted,
  MalformedResponse,
  UnknownInstance,
  ProbabilityUnsupported,
  EmptyHint,
  HintEqualsSource,
  EmptyList,
  WrongKind,
  EmptyCandidate,
  AllInstancesFailed,
  MalformedLine,
  MissingField,
  DuplicateId,
  SampleTooLarge,
  UnparsableVerdict,
  UnparsableScore,
  RunExists,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Failures that originate in a generation backend (transport, script, wire
/// format). Optimizer loops treat these as run-terminating.
bool is_backend_failure(ErrorCode code) noexcept;

}  // namespace faithlm

#include "faithlm/errors.hpp"

namespace faithlm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoChoiceMatched: return "NoChoiceMatched";
    case ErrorCode::AmbiguousAnswer: return "AmbiguousAnswer";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::ProbabilityUnsupported: return "ProbabilityUnsupported";
    case ErrorCode::EmptyHint: return "EmptyHint";
    case ErrorCode::HintEqualsSource: return "HintEqualsSource";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::EmptyCandidate: return "EmptyCandidate";
    case ErrorCode::AllInstancesFailed: return "AllInstancesFailed";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::UnparsableVerdict: return "UnparsableVerdict";
    case ErrorCode::UnparsableScore: return "UnparsableScore";
    case ErrorCode::RunExists: return "RunExists";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

bool is_backend_failure(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ScriptExhausted:
    case ErrorCode::MalformedResponse:
    case ErrorCode::UnknownInstance:
      return true;
    default:
      return false;
  }
}

}  // namespace faithlm

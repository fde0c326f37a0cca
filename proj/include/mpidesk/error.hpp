#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <utility>

namespace mpidesk {

enum class ErrorCode : std::int32_t {
  Success = 0,
  InvalidHandle = 1,
  KindMismatch = 2,
  Truncated = 3,
  PendingAtCheckpoint = 4,
  ReplayMismatch = 5,
  BackendFailure = 6,
};

constexpr const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Success: return "Success";
    case ErrorCode::InvalidHandle: return "InvalidHandle";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::PendingAtCheckpoint: return "PendingAtCheckpoint";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::BackendFailure: return "BackendFailure";
  }
  return "Unknown";
}

// Error thrown by all layers. Carries the standard-ABI error code the failed
// operation maps to, so callers and tests can dispatch on it.
class AbiError : public std::exception {
 public:
  AbiError(ErrorCode code, std::string message)
      : code_(code),
        what_(std::string(error_name(code)) + ": " + std::move(message)) {}

  ErrorCode code() const noexcept { return code_; }
  const char* what() const noexcept override { return what_.c_str(); }

 private:
  ErrorCode code_;
  std::string what_;
};

[[noreturn]] inline void raise(ErrorCode code, std::string message) {
  throw AbiError(code, std::move(message));
}

}  // namespace mpidesk

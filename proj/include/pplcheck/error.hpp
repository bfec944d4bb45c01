#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

namespace pplcheck {

enum class ErrorKind {
  Validation,
  Parse,
  Io,
  UnsupportedMode,
  EmptyTarget,
  BackendUnavailable,
  Backend,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::UnsupportedMode: return "unsupported-mode";
    case ErrorKind::EmptyTarget: return "empty-target";
    case ErrorKind::BackendUnavailable: return "backend-unavailable";
    case ErrorKind::Backend: return "backend";
  }
  return "unknown";
}

// Process exit code for each error class: 2 validation, 3 I/O, 4 backend.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return 3;
    case ErrorKind::BackendUnavailable:
    case ErrorKind::Backend: return 4;
    default: return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::chrono::milliseconds> retry_after = std::nullopt)
      : std::runtime_error(message), kind_(kind), retry_after_(retry_after) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Only set for BackendUnavailable: how long the caller should wait before
  // trying again.
  std::optional<std::chrono::milliseconds> retry_after() const noexcept {
    return retry_after_;
  }

 private:
  ErrorKind kind_;
  std::optional<std::chrono::milliseconds> retry_after_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace pplcheck

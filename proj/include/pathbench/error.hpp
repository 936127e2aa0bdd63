#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathbench {

enum class ErrorKind {
  Config,        // bad configuration or flags
  Schema,        // missing column / malformed input file
  Integrity,     // duplicate ids, leakage, contract breach in data
  Transport,     // retries exhausted talking to a backend
  Protocol,      // backend answered with a non-retryable error
  Io,            // filesystem failures
  Precondition,  // caller broke an operation's precondition
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Io: return "io";
    case ErrorKind::Precondition: return "precondition";
  }
  return "unknown";
}

/// Process exit status for a failure of the given kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Transport: return 3;
    case ErrorKind::Schema:
    case ErrorKind::Integrity: return 4;
    default: return 1;
  }
}

}  // namespace pathbench

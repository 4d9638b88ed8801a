#pragma once

#include <stdexcept>
#include <string>

namespace edit {

/// Failure categories used across the toolkit. The CLI maps these onto
/// process exit codes (usage -> 2, numeric -> 4, the rest -> 3).
enum class ErrorKind {
  domain,     // value outside its admissible range
  shape,      // tensor/layout mismatch
  format,     // unrecognized or wrong-version file format
  integrity,  // corrupt or truncated payload
  numeric,    // non-finite values where finite ones are required
  data,       // unreadable or undecodable input data
  usage,      // bad command-line or API usage
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::shape: return "shape";
    case ErrorKind::format: return "format";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::data: return "data";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  /// Single-line machine-parsable rendering, e.g. "error[shape]: ...".
  std::string formatted() const {
    return std::string("error[") + to_string(kind_) + "]: " + what();
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

}  // namespace edit

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccftl {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  non_finite,
  out_of_range,
  crypto,
  config,
  io,
  missing_artifact,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::crypto: return "crypto";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::missing_artifact: return "missing-artifact";
  }
  return "unknown";
}

/// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace ccftl

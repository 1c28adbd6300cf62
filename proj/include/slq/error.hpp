#pragma once

#include <stdexcept>
#include <string>

namespace slq {

enum class ErrorCode {
  invalid_grid,
  shape,
  domain,
  numeric,
  capacity,
  indefinite,
  no_equilibrium,
  config,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_grid: return "invalid-grid";
    case ErrorCode::shape: return "shape";
    case ErrorCode::domain: return "domain";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::indefinite: return "indefinite";
    case ErrorCode::no_equilibrium: return "no-equilibrium";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto a message and exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " error: " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace slq

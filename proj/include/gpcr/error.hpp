#pragma once

#include <stdexcept>
#include <string>

namespace gpcr {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  input = 2,    ///< bad shapes, flags, or data content
  numeric = 3,  ///< non-finite objective, failed factorization
  io = 4,       ///< missing or unreadable files, truncated model files
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::input: return "INPUT";
    case ErrorCode::numeric: return "NUMERIC";
    case ErrorCode::io: return "IO";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorCode::input, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCode::numeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

}  // namespace gpcr

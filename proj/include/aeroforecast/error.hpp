#pragma once

#include <stdexcept>
#include <string>

namespace aerofc {

enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  parse = 3,
  data = 4,
  numeric = 5,
  partial_failure = 6,
  internal = 7,
};

/// Exception type thrown by every module; the code survives the trip
/// through the C API as an af_status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorCode::invalid_argument, what);
}

}  // namespace aerofc

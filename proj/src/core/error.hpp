#pragma once

#include <stdexcept>
#include <string>

namespace sitcom {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kNumeric = 3,
  kIo = 4,
  kConfig = 5,
};

// Every failure inside the library surfaces as this exception; the C layer
// maps the code onto sitcom_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace sitcom

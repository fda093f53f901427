#pragma once

#include <stdexcept>
#include <string>

namespace emopred {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kRuntime = 4,
};

// Single exception type for the library; the C API maps `code()` onto its
// status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}
[[noreturn]] inline void throw_io(const std::string& what) {
  throw Error(ErrorCode::kIo, what);
}
[[noreturn]] inline void throw_format(const std::string& what) {
  throw Error(ErrorCode::kFormat, what);
}
[[noreturn]] inline void throw_runtime(const std::string& what) {
  throw Error(ErrorCode::kRuntime, what);
}

}  // namespace emopred

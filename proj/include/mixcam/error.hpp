#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixcam {

// Error categories surface in CLI output as "error:<category>: <message>".
enum class ErrorCategory { config, io, data, shape, state, numeric, usage };

constexpr std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::data: return "data";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::state: return "state";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::usage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg) : std::runtime_error(msg), cat_(cat) {}
  ErrorCategory category() const noexcept { return cat_; }

 private:
  ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) { throw Error(cat, msg); }

}  // namespace mixcam

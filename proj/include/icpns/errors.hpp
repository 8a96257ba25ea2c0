#pragma once

#include <stdexcept>
#include <string>

namespace icpns {

enum class ErrorCategory {
  io,          // file cannot be opened / read / written
  parse,       // malformed input data
  config,      // bad configuration value or unknown key
  validation,  // data structure violates an invariant
  empty_core,  // k-core filtering removed everything
  no_candidate,// a sampler has no admissible item
  no_mass,     // alias table built over all-zero weights
  numeric,     // non-finite value where a finite one is required
  state,       // operation applied to an object in the wrong state
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::config: return "config";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::empty_core: return "empty_core";
    case ErrorCategory::no_candidate: return "no_candidate";
    case ErrorCategory::no_mass: return "no_mass";
    case ErrorCategory::numeric: return "numeric";
    case ErrorCategory::state: return "state";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(std::string(to_string(category)) + ": " + message),
        category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace icpns

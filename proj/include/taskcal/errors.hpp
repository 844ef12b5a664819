#pragma once

#include <stdexcept>
#include <string>

namespace taskcal {

// Malformed input: files, CLI flags, shape or domain violations.
// The CLI maps this to exit code 1.
struct ValidationError : std::invalid_argument {
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A computation produced non-finite values or cannot proceed numerically.
// The CLI maps this to exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace taskcal

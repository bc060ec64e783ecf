#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dve {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries a 1-based line number when known (0 otherwise).
struct ParseError : Error {
  explicit ParseError(const std::string& msg, std::int64_t line_no = 0)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
  std::int64_t line;
};

// Structurally invalid data or arguments (bad shapes, bad config values, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Non-finite values or numeric breakdown during computation.
struct NumericError : Error {
  using Error::Error;
};

// Filesystem trouble while writing outputs.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dve

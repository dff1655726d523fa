#pragma once

#include <stdexcept>
#include <string>

namespace dirdet {

/// Bad input data: schema violations, out-of-domain values, inconsistent records.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Line-oriented formats carry the 1-based line number
/// of the offending line; other formats report line() == 0.
struct ParseError : ValidationError {
  explicit ParseError(const std::string& what) : ValidationError(what), line_(0) {}
  ParseError(int line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Invalid configuration (negative loss weight, bad threshold, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File or stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scene generation could not satisfy the separation constraint within the retry budget.
struct PackingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dirdet

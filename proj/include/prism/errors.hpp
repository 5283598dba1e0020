#pragma once

#include <stdexcept>
#include <string>

namespace prism {

// Invalid configuration value or unknown key.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or shape mismatch between operands.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Unparseable input (judge replies, JSONL records, lexicon files).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset-level violation: empty split, schema mismatch, missing field.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Judge service unavailable after retries with fallback disabled.
struct JudgeError : std::runtime_error {
  explicit JudgeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure; message carries the offending path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value where the algorithm requires finite arithmetic.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace prism

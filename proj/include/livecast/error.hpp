#pragma once

#include <stdexcept>
#include <string>

namespace livecast {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or axis mismatch in a tensor op.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Bad configuration value (negative lengths, invalid enum, ...).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf produced where a finite value is required.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Operation requested on a predictor that does not support it.
struct CapabilityError : Error {
  explicit CapabilityError(const std::string& msg) : Error(msg) {}
};

// Malformed input data; carries the 1-based line number when known.
struct ParseError : Error {
  ParseError(const std::string& msg, long line) : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  explicit ParseError(const std::string& msg) : Error(msg), line_number(-1) {}
  long line_number;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  DivergenceError(const std::string& msg, int epoch) : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch(epoch) {}
  int epoch;
};

// Singular or near-singular regression system.
struct CollinearityError : Error {
  explicit CollinearityError(const std::string& msg) : Error(msg) {}
};

}  // namespace livecast

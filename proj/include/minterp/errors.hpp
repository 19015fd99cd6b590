#pragma once

#include <stdexcept>
#include <string>

namespace minterp {

// Validation failures (bad arguments, malformed documents) map to CLI exit 1,
// runtime failures map to exit 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : ValidationError {
  explicit InvalidArgument(const std::string& msg) : ValidationError(msg) {}
};

struct KindMismatch : ValidationError {
  explicit KindMismatch(const std::string& msg) : ValidationError(msg) {}
};

struct SchemaViolation : ValidationError {
  explicit SchemaViolation(const std::string& msg) : ValidationError(msg) {}
};

struct ParseError : ValidationError {
  explicit ParseError(const std::string& msg) : ValidationError(msg) {}
};

struct OutOfBounds : ValidationError {
  explicit OutOfBounds(const std::string& msg) : ValidationError(msg) {}
};

struct EmptyRegion : ValidationError {
  explicit EmptyRegion(const std::string& msg) : ValidationError(msg) {}
};

struct UninterpretablePatch : std::runtime_error {
  explicit UninterpretablePatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct TooLarge : std::runtime_error {
  explicit TooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientData : std::runtime_error {
  explicit InsufficientData(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace minterp

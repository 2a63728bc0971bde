#pragma once

#include <stdexcept>
#include <string>

namespace ifgnet {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf reached a library boundary.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable cube/label file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kVersionMismatch,
    kTruncated,
    kMalformed,
    kShapeMismatch,
    kVariantMismatch,
  };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace ifgnet

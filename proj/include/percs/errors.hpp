#pragma once

#include <stdexcept>
#include <string>

namespace percs {

/// Canvas or tensor shapes that do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data violating a type invariant (negative labels, non-finite values, ...).
class MalformedInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameter outside its documented range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyInstanceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyReferenceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reference-selection protocol violations (missing fixed reference, empty mask).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset content inconsistent with its manifest.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest JSON that does not follow the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace percs

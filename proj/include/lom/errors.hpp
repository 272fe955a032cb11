#pragma once

#include <stdexcept>
#include <string>

namespace lom {

// Base of every error raised by the library. Subclasses map onto the CLI exit
// codes in tools/lom_cli.cpp.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches and invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition (bad index, empty request).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A trained network produced non-finite head outputs.
class ModelCorruptError : public Error {
 public:
  using Error::Error;
};

// A tabular theorem check found a violation.
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lom

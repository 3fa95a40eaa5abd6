#pragma once

#include <stdexcept>
#include <string>

namespace gelgt {

// Base for every error raised by the library. Subclasses let the CLI map
// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameter during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gelgt

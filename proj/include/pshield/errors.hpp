#pragma once

#include <stdexcept>
#include <string>

namespace pshield {

// Common base so callers can catch everything from this library at once.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input outside the mathematical domain of an operation (e.g. logit of 1.2).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Vector/matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A perturbed score vector collapsed to (numerically) all zeros and cannot
// be renormalized onto the simplex.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// A parameter value is out of its documented range.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment/training configuration; message carries the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unrecognized config key (only raised in strict parsing mode).
class UnknownKeyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Requested more queries than the pool holds.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; message names the offending line.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structural problem with a file (missing header, ragged row, empty file).
// Derives from ParseError: a ragged row is both a schema violation and a
// parse failure at a specific line.
class SchemaError : public ParseError {
 public:
  using ParseError::ParseError;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

class EmptyReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace pshield

#pragma once

#include <stdexcept>
#include <string>

namespace kinoplan {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: malformed configuration, inconsistent sizes, bad files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be parsed or written.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A remote or stub backend failed (network, timeout, non-2xx status).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A backend answered, but the payload does not satisfy the wire schema.
class SchemaError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// NaN/Inf or divergence inside an optimizer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace kinoplan

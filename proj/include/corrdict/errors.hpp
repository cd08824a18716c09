#pragma once

#include <stdexcept>
#include <string>

namespace corrdict {

// Base of every error the library throws. The CLI maps these onto exit codes:
// NumericalError subclasses are exit 3, everything else is a usage error (2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroColumn : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class NotEnoughSignals : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFinite : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace corrdict

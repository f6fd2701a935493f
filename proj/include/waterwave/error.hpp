#pragma once

#include <stdexcept>
#include <string>

namespace waterwave {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameter or argument supplied by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Problems with input data: files, shapes, formats.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Frame sequence on disk is not consecutively numbered.
class SequenceGapError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values or solver failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace waterwave

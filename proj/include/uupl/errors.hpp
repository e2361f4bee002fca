#pragma once

#include <stdexcept>
#include <string>

namespace uupl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// Newton did not reach the gradient tolerance within the iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double grad_norm)
      : Error(what), iterations_(iterations), grad_norm_(grad_norm) {}
  int iterations() const { return iterations_; }
  double grad_norm() const { return grad_norm_; }

 private:
  int iterations_;
  double grad_norm_;
};

/// A Newton step produced non-finite values or could not be factorized.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uupl

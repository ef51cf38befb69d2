#pragma once

#include <stdexcept>
#include <string>

namespace kkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain of a model function (e.g. bearing of the origin).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A symmetric factorization kept failing after jitter escalation.
class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& matrix_name)
      : Error("singular matrix: " + matrix_name), name_(matrix_name) {}
  const std::string& matrix_name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// A filter or simulation produced a non-finite value at time index n.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, int time_index)
      : Error(what + " (n=" + std::to_string(time_index) + ")"), n_(time_index) {}
  int time_index() const noexcept { return n_; }

 private:
  int n_;
};

/// Every particle weight underflowed; the particle filter cannot continue.
class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

}  // namespace kkf

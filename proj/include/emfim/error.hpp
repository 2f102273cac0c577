#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emfim {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the model's valid domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Parameter on the boundary where a quantity is singular (e.g. mixing weight 0 or 1 in the score).
class BoundaryParameter : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

/// An optional model capability (score, observed log-likelihood, complete-data information) was requested but not provided.
class UnsupportedCapability : public Error {
 public:
  using Error::Error;
};

/// M-step produced 0/0 or a non-positive variance.
class DegenerateUpdate : public Error {
 public:
  using Error::Error;
};

class ResponsibilityUnderflow : public Error {
 public:
  using Error::Error;
};

class InvalidPerturbation : public Error {
 public:
  using Error::Error;
};

/// A perturbed probe point left the model's domain.
class PerturbationOutOfDomain : public Error {
 public:
  PerturbationOutOfDomain(std::size_t replicate, std::string what)
      : Error("replicate " + std::to_string(replicate) + ": " + what), replicate_(replicate) {}

  std::size_t replicate() const noexcept { return replicate_; }

 private:
  std::size_t replicate_;
};

class FilterSingularity : public Error {
 public:
  using Error::Error;
};

/// SEM difference quotient with a coordinate that has already converged.
class CoordinateDegenerate : public Error {
 public:
  using Error::Error;
};

class OracleFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace emfim

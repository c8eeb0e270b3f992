#pragma once

#include <stdexcept>
#include <string>

namespace selmut {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array length or grid mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Total mass vanished (or was never positive).
class ExtinctionError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid model or probe configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for the requested model family or kernel.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Numerical domain problem (divergent transform, non-finite value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Step-size underflow or right-hand side overflow.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

/// Hamilton-Jacobi step violates the CFL restriction.
class CflError : public Error {
 public:
  CflError(const std::string& what, double required_dt) : Error(what), required_dt_(required_dt) {}
  double required_dt() const noexcept { return required_dt_; }

 private:
  double required_dt_;
};

/// Bad experiment configuration; carries the offending key path.
class UsageError : public Error {
 public:
  UsageError(const std::string& what, std::string key = {}) : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace selmut

#pragma once

#include <stdexcept>
#include <string>

namespace steinflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (dimension mismatch, bad weights, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (non-positive bandwidth, non-SPD covariance, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The particle set cannot support the requested quantity (e.g. all points identical).
class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

/// A step produced non-finite state.
class Diverged : public Error {
 public:
  using Error::Error;
};

/// I + eps*J became (numerically) singular.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

/// An operation needed tracked log-densities on an ensemble that has none.
class TrackingDisabled : public Error {
 public:
  using Error::Error;
};

}  // namespace steinflow

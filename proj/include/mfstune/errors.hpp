#pragma once

#include <stdexcept>
#include <string>

namespace mfstune {

// Root of every error thrown by the library. Subclasses name the failure
// category so the CLI can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A fictitious boundary collides with (or sits on the wrong side of) a
// physical interface.
class GeometryDegenerate : public Error {
 public:
  using Error::Error;
};

// Input lies outside the domain where an operation is defined, e.g. a dipole
// outside the brain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Kernel evaluated at its own center.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// The quality metric is undefined because the reference field is zero.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class RegionInfeasible : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ResumeIntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfstune

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace toric {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input/validation errors (CLI maps these to exit code 65).
struct ValidationError : Error {
  using Error::Error;
};

struct NonReflexive : ValidationError {
  using ValidationError::ValidationError;
};
struct OriginNotInterior : ValidationError {
  using ValidationError::ValidationError;
};
struct InconsistentDescription : ValidationError {
  using ValidationError::ValidationError;
};
struct UnsupportedDimension : ValidationError {
  using ValidationError::ValidationError;
};
struct PointOutsidePolytope : ValidationError {
  using ValidationError::ValidationError;
};
struct BarycenterAtOrigin : ValidationError {
  using ValidationError::ValidationError;
};
struct ImproperFace : ValidationError {
  using ValidationError::ValidationError;
};
struct KEExists : ValidationError {
  using ValidationError::ValidationError;
};
struct DegenerateWeights : ValidationError {
  using ValidationError::ValidationError;
};

// Numerical errors.
struct NumericalError : Error {
  using Error::Error;
};

struct TailBoundFailure : NumericalError {
  using NumericalError::NumericalError;
};
struct TailNotCertified : NumericalError {
  using NumericalError::NumericalError;
};
struct NotConverged : NumericalError {
  using NumericalError::NumericalError;
};
struct ConvexityLost : NumericalError {
  using NumericalError::NumericalError;
};

// Converged solve whose minimizer sits too close to the window edge; caller
// should recenter and retry. Carries the offending location.
struct MinimizerAtBoundary : NumericalError {
  MinimizerAtBoundary(const std::string& msg, std::vector<double> where)
      : NumericalError(msg), location(std::move(where)) {}
  std::vector<double> location;
};

}  // namespace toric

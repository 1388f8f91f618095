#pragma once

#include <stdexcept>
#include <string>

namespace pm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed game data: shape mismatch, loss out of range, empty matrices.
struct InvalidGame : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// File parse / write problems, with file and field context in the message.
struct IoError : Error {
  using Error::Error;
};

// Numerical failure inside the LP machinery.  Distinct from an empty
// polytope, which is a regular return value.
struct LpFailure : Error {
  using Error::Error;
};

// Conic / convex solver did not converge.
struct SolverFailure : Error {
  using Error::Error;
};

// Requested estimator does not exist (edge or game not observable enough).
struct NotObservable : Error {
  using Error::Error;
};

}  // namespace pm

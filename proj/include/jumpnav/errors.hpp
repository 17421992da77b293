#pragma once

#include <stdexcept>
#include <string>

namespace jumpnav {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config / file format problems (CLI exit code 2).
struct ParseError : Error {
  using Error::Error;
};

// Model misuse or invalid parameters.
struct ModelError : Error {
  using Error::Error;
};
struct FlightHasNoContact : ModelError {
  FlightHasNoContact() : ModelError("flight phase has no contact jacobian") {}
};
struct NonzeroForceOnFreeLeg : ModelError {
  NonzeroForceOnFreeLeg() : ModelError("contact force on a leg that is not in contact") {}
};
struct SingularMassMatrix : ModelError {
  explicit SingularMassMatrix(double cond)
      : ModelError("mass matrix conditioning " + std::to_string(cond) +
                   " exceeds the configured bound") {}
};
struct InvalidParams : ModelError {
  using ModelError::ModelError;
};

// Geometry misuse.
struct GeometryError : Error {
  using Error::Error;
};
struct DegenerateKeypoints : GeometryError {
  DegenerateKeypoints() : GeometryError("all key points coincide, no box orientation") {}
};
struct MalformedPolygon : GeometryError {
  using GeometryError::GeometryError;
};

// Trajectory optimization failures.
struct OptimizationError : Error {
  using Error::Error;
};
// A problem whose data contradicts itself before any solve is attempted.
struct InconsistentProblem : OptimizationError {
  using OptimizationError::OptimizationError;
};
// No feasible trajectory (CLI exit code 3).
struct InfeasibleJump : OptimizationError {
  InfeasibleJump(std::string worst, double viol)
      : OptimizationError("jump infeasible, worst constraint " + worst + " violated by " +
                          std::to_string(viol)),
        worst_constraint(std::move(worst)),
        violation(viol) {}
  explicit InfeasibleJump(const std::string& why)
      : OptimizationError("jump infeasible: " + why), worst_constraint(why) {}
  std::string worst_constraint;
  double violation = 0.0;
};
// Iteration or wall-clock budget exhausted without a verdict (CLI exit code 4).
struct OptimizationTimeout : OptimizationError {
  using OptimizationError::OptimizationError;
};

}  // namespace jumpnav

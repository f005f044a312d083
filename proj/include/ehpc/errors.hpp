#pragma once

#include <stdexcept>

namespace ehpc {

/// Thrown when an iterative solve fails to reach its tolerance.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown by the simulation harness when a policy misbehaves at run time.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ehpc

#pragma once

#include <stdexcept>
#include <string>

namespace flowdse {

// Malformed or inconsistent input: schema violations, infeasible bounds,
// invalid designs. The CLI maps these to exit status 3.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A design whose topology cannot be simulated (cycle, broken process order,
// missing default route).
class TopologyError : public InputError {
 public:
  using InputError::InputError;
};

// Internal invariant violated while running a model. Exit status 4.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowdse

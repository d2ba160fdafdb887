#pragma once

#include <stdexcept>

namespace cosserat {

// Invalid or inconsistent configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The forward-backward iteration blew up or produced non-finite values.
struct SolverDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The time integrator left its stable regime.
struct SimulationInstability : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cosserat

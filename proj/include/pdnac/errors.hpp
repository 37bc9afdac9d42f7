#pragma once

#include <stdexcept>
#include <string>

namespace pdnac {

// Error hierarchy. Each family maps onto one CLI exit code (see exit_code()).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The induced chain of some policy is reducible or periodic.
struct ErgodicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No policy satisfies J_c >= 0 (or no strictly feasible one exists).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A modelling assumption needed by an estimator does not hold for the given inputs.
struct AssumptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An inner-loop iterate left its admissible ball; usually a step-size problem.
struct DivergenceError : NumericError {
    using NumericError::NumericError;
};

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int config_error = 2;
inline constexpr int infeasible = 3;
inline constexpr int divergence = 4;
}  // namespace exit_codes

}  // namespace pdnac

#pragma once

#include <stdexcept>
#include <string>

namespace sdcbf {

/// Bad scenario/config input: unknown names, malformed files, missing keys.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values, dimension mismatches, ill-conditioned inertia, failed projections.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Adaptive integration ran out of steps or underflowed its step size.
struct IntegrationError : std::runtime_error {
    explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

/// Projection solver failed to converge; message carries the iterate trace.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Decrement constraint certified infeasible: the barrier is not an SD-CBF
/// for this system at this state and period.
struct SdcbfViolation : SolverError {
    explicit SdcbfViolation(const std::string& what) : SolverError(what) {}
};

/// Rejection sampling acceptance rate collapsed.
struct SamplingError : std::runtime_error {
    explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sdcbf

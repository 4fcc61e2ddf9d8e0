#pragma once

#include <stdexcept>
#include <string>

namespace tpcflow {

/// Invalid configuration value (bad arch, negative weight, unknown enum name).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Argument outside its mathematical domain (e.g. t outside [0,1]).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value produced during evaluation. Carries the name of the
/// parameter segment whose computation produced the value, when known.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg, std::string segment = "")
        : std::runtime_error(segment.empty() ? msg : msg + " (segment: " + segment + ")"),
          segment_name(std::move(segment)) {}
    std::string segment_name;
};

/// Dataset or coupling table unusable (empty, wrong arity, unreadable).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// ODE solve failed (state blew up or step size underflowed).
struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& msg, long step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
    long step_index;
};

/// An estimator required a nonzero moment that vanished.
struct DegenerateError : std::runtime_error {
    explicit DegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tpcflow

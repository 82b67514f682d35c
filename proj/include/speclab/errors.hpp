#pragma once

#include <stdexcept>
#include <string>

namespace speclab {

/// Precondition violations (width mismatches, invalid parameters).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Requested computation exceeds the configured memory/size budget.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numeric failure (non-convergence, quadrature breakdown). Carries the
/// best estimate available at the point of failure.
struct NumericError : std::runtime_error {
    double best_estimate;
    explicit NumericError(const std::string& what, double best = 0.0)
        : std::runtime_error(what), best_estimate(best) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace speclab

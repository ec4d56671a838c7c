#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace belllab {

/// Invalid argument value (out-of-range probability, bad bias, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A computation was asked for on data that cannot support it
/// (empty batch, unpopulated setting pair, undersized collective).
struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation not defined for this model kind (e.g. counterfactuals of a
/// quantum source).
struct UnsupportedOperationError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Pipeline contract breach: a caller did something the decision layer
/// should have prevented (e.g. blaming an inadmissible evaluation).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Configuration / input-file validation failure. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem failure. Maps to CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One simplex pivot, kept for post-mortem traces.
struct PivotStep {
    int iteration = 0;
    int entering = -1;
    int leaving = -1;
    double objective = 0.0;
};

/// LP did not terminate within its iteration cap. Maps to CLI exit code 4.
/// Never returned as a verdict; carries the pivot trace instead.
struct SolverFailure : std::runtime_error {
    std::vector<PivotStep> trace;
    SolverFailure(const std::string& what, std::vector<PivotStep> steps)
        : std::runtime_error(what), trace(std::move(steps)) {}
};

} // namespace belllab

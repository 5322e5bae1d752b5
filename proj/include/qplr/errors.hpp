#pragma once

#include <stdexcept>
#include <string>

namespace qplr {

/// Invalid run configuration (bad qubit count, malformed config file, ...).
/// CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

/// A caller broke an API precondition (index out of range, shape mismatch).
struct ContractViolation : std::logic_error {
    explicit ContractViolation(const std::string &msg) : std::logic_error(msg) {}
};

/// Training diverged or produced non-finite values. CLI exit code 3.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Dataset files missing, truncated, or malformed. CLI exit code 4.
struct IngestionError : std::runtime_error {
    explicit IngestionError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Input degenerate for the requested operation (all-zero image for
/// amplitude encoding, zero retained probability mass, ...).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string &msg)
        : std::runtime_error(msg) {}
};

} // namespace qplr

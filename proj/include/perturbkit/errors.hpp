#pragma once
// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 2, AdapterError -> 3, ValidationError / StatsError -> 4.

#include <stdexcept>
#include <string>

namespace perturbkit {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Backend unreachable, timed out, or returned garbage.
struct AdapterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Face-attribution backend found no face; the owning set is dropped.
struct NoFaceError : AdapterError {
    explicit NoFaceError(const std::string& image_ref)
        : AdapterError("no face found in image: " + image_ref) {}
};

// Record or file content violates a documented invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate statistical input (e.g. a contingency table with an empty margin).
struct StatsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage aborted (zero survivors, missing adapter, ...).
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace perturbkit

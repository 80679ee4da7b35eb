#pragma once
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ljcell {

/// Base of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration. `key` and `line` are filled when
/// the problem can be traced to a config file entry (line 0 = unknown).
struct ConfigError : Error {
    std::string key;
    int line = 0;

    explicit ConfigError(const std::string& msg, std::string k = {}, int ln = 0)
        : Error(msg), key(std::move(k)), line(ln) {}
};

/// Initial-state generation failed (e.g. density not representable).
struct GenerationError : ConfigError {
    double nearest_density = 0.0;

    GenerationError(const std::string& msg, double nearest)
        : ConfigError(msg), nearest_density(nearest) {}
};

/// Numerical blow-up. `step` is -1 until the integrator attaches it.
struct NumericalError : Error {
    std::int64_t step = -1;

    explicit NumericalError(const std::string& msg, std::int64_t s = -1)
        : Error(msg), step(s) {}
};

/// Two interaction sites closer than the overlap threshold.
struct OverlapError : NumericalError {
    using NumericalError::NumericalError;
};

/// A molecule reached z <= 0 in the presence of the z=0 wall.
struct WallEscapeError : NumericalError {
    using NumericalError::NumericalError;
};

/// Molecule outside the region a cell grid can index.
struct OwnershipError : Error {
    using Error::Error;
};

/// Decomposition cannot be built (too few cells for the workers, bad tiling).
struct PartitionError : Error {
    using Error::Error;
};

/// Message received from a worker that is not a registered neighbour.
struct TopologyError : Error {
    using Error::Error;
};

/// A worker stopped responding or died.
struct WorkerFailure : Error {
    using Error::Error;
};

/// Internal bookkeeping drifted away from a full recomputation.
struct ConsistencyError : Error {
    using Error::Error;
};

}  // namespace ljcell

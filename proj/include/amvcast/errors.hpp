#pragma once

#include <stdexcept>
#include <string>

namespace amvcast {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid generator or pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset assembly failed (empty pool, infeasible lead, too few samples).
class DataError : public Error {
public:
    using Error::Error;
};

/// A fitted quantity collapsed (zero variance, zero threshold).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// File content violates the expected format or schema.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Mask harmonization produced an unusable (empty) validity mask.
class MaskError : public Error {
public:
    using Error::Error;
};

/// Non-finite value in a numeric computation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Region does not overlap the grid, or no weighted-valid cell exists.
class RegionError : public Error {
public:
    using Error::Error;
};

/// Array dimensions incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

}  // namespace amvcast

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace postratio {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data (CSV rows, JSON envelopes, dataset contents).
class DataError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t actual)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(actual)) {}
};

/// Invalid arguments to a fitting or selection routine.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace postratio

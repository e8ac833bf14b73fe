#pragma once

#include <stdexcept>
#include <string>

namespace hybridgen {

// Base class for all errors raised by the library. Each subclass marks one
// failure category so callers (and the CLI exit-code mapping) can tell them
// apart without string matching.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension or length mismatch in numeric kernels.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value (zero dimension, infeasible budget, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Invalid runtime input (empty prompt, empty token subset, ...).
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// Logit segments do not cover the expected token ids.
class CoverageError : public Error {
public:
    explicit CoverageError(const std::string& msg) : Error(msg) {}
};

// Logit segments claim the same token id more than once.
class OverlapError : public Error {
public:
    explicit OverlapError(const std::string& msg) : Error(msg) {}
};

// A memory tier ran out of room and the simulation cannot continue.
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& msg) : Error(msg) {}
};

// Internal bookkeeping mismatch (e.g. cost query for an unplaced token).
class ConsistencyError : public Error {
public:
    explicit ConsistencyError(const std::string& msg) : Error(msg) {}
};

} // namespace hybridgen

#pragma once

#include <stdexcept>
#include <string>

namespace storagedp {

/// Bad parameters, inconsistent shapes, or a size guard that was exceeded.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An argument outside the mathematical domain of an operation (e.g. a state
/// of charge above the energy capacity).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or missing input data (CSV files, scenario files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A broken internal invariant. Seeing one of these is a bug.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace storagedp

#pragma once

#include <stdexcept>
#include <string>

namespace nds {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates a documented field invariant or operation precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Scenario file does not match the shipped schema. `line` is 1-based, 0 when unknown.
class SchemaError : public Error {
public:
    SchemaError(int line, const std::string &msg)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), _line{line} {}

    int line() const noexcept { return _line; }

private:
    int _line;
};

/// A runtime safety invariant was breached. Always a bug.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

class CorruptLedger : public Error {
public:
    using Error::Error;
};

} // namespace nds

#pragma once

#include <stdexcept>
#include <string>

namespace mbsc {

/// Violated precondition or inconsistent inputs (dimension mismatch, unknown unit, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file or document. `where` is "file:line" when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
    ParseError(const std::string& where, const std::string& msg)
        : std::runtime_error(where + ": " + msg) {}
};

/// Non-finite objective, solver breakdown, underflow.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mbsc

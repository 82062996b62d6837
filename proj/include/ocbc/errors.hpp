#pragma once

#include <stdexcept>
#include <string>

namespace ocbc {

/// Input that violates a documented invariant (probability rows, ranges, indices).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear or fixed-point solve that did not reach its tolerance.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampled data that is impossible under the stated behavior policy.
class MalformedData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A request outside what the library models (e.g. action-dependent labels).
class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed structured text; carries the 1-based position of the problem.
class ParseError : public InvalidInput {
public:
    ParseError(const std::string& what, int line, int column)
        : InvalidInput(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// File system failure; the message names the path involved.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ocbc

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hse {

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Cosine similarity (or anything built on it) was asked about a zero vector.
class DegenerateInputError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A non-finite value appeared where only finite values are allowed.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A corpus line could not be parsed. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Parsed data violates a structural invariant (dimensions, counts, ids).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A binary checkpoint is malformed, truncated or mismatched.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hse

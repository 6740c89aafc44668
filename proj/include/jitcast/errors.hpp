#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jitcast {

/// Operand shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values where finite ones are required (NaN loss, NaN gradient, ...).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fitted scale (IQR or standard deviation) is zero.
class DegenerateScaleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the offending 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace jitcast

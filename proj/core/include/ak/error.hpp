#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ak {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Architecture or experiment configuration is inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Caller-supplied data violates an operation's contract (shape, labels, empty input).
class InputError : public Error {
public:
    using Error::Error;
};

// An operation's mathematical precondition does not hold (e.g. unrescaled SVM features).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Input is numerically degenerate: all-zero matrices, zero norms.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// A file did not parse. `offset()` is the byte position where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace ak

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evsr {

// Base class for every error thrown by this library. Callers that do not care
// about the specific failure can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text input. Remembers the 1-based line the problem was found on.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// An operation asked for more events than the stream can provide. Carries the
// number of events that were actually available so callers can report or retry.
class ShortStreamError : public Error {
public:
    ShortStreamError(const std::string& msg, std::size_t available)
        : Error(msg), available_(available) {}

    std::size_t available() const { return available_; }

private:
    std::size_t available_;
};

// Tensor or image dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace evsr

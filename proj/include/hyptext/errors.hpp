#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace hyptext {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

// Gradient of arcosh is singular when the two points coincide.
class DegeneratePair : public Error {
public:
    using Error::Error;
};

class DegenerateDirection : public Error {
public:
    using Error::Error;
};

class NonFiniteGradient : public Error {
public:
    explicit NonFiniteGradient(std::string parameter)
        : Error("non-finite gradient in parameter '" + parameter + "'"), parameter_(std::move(parameter)) {}

    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what), position_(position) {}

    // Line number (1-based) or byte offset, depending on the reader.
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CheckpointMismatch : public Error {
public:
    using Error::Error;
};

} // namespace hyptext

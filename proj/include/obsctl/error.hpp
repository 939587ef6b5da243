#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obsctl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Zero/negative pivot or a solve whose backward error is too large.
class SingularMatrix : public Error {
public:
    using Error::Error;
};

/// The Newton matrix at the current penalty parameter can no longer be
/// trusted; the homotopy driver stops increasing gamma when it sees this.
class IllConditioned : public Error {
public:
    using Error::Error;
};

class LinearSolveFailure : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, std::size_t iterations)
        : Error(what), iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

class SyntaxError : public Error {
public:
    SyntaxError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

class UnknownIdentifier : public SyntaxError {
public:
    UnknownIdentifier(const std::string& name, std::size_t position)
        : SyntaxError("unknown identifier '" + name + "'", position), name_(name) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

class MeshMismatch : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace obsctl

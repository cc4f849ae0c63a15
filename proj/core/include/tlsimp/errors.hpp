#pragma once

#include <stdexcept>
#include <string>

namespace tlsimp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs violate a documented precondition or schema.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (integrator, solver, optimizer).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tlsimp

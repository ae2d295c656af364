#pragma once

#include <stdexcept>
#include <string>

namespace mesr {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: violated preconditions, malformed files, inconsistent configs.
/// The CLI maps this to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A computation that could not complete (e.g. a tracker losing its point).
class ComputeError : public Error {
public:
    using Error::Error;
};

}  // namespace mesr

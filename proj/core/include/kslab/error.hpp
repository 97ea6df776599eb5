#pragma once

#include <stdexcept>
#include <string>

namespace kslab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied parameters that violate a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Index or site outside the represented range of an object.
class OutOfRange : public Error {
public:
    using Error::Error;
};

/// A construction violates the structural rules of its specification
/// (functional referencing a non-inner site, coverage, truncation, caps).
class SpecViolation : public Error {
public:
    using Error::Error;
};

/// An algorithm failed to reach its accuracy target.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

}  // namespace kslab

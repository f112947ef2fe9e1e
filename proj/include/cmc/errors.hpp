#pragma once

#include <stdexcept>
#include <string>

namespace cmc {

/// Base class for all library failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument violates an operation precondition.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The integrator or a linear solve failed.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Period or event detection did not find the requested event.
class DetectionError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The gauge-fixed Newton system is singular.
class SolverError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A fit could not be set up (ill-conditioned axis, short window).
class FitError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw DomainError(msg);
}

} // namespace detail
} // namespace cmc

#pragma once

#include <stdexcept>
#include <string>

namespace sysid {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed (eigen-solver, factorization, singular input).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Matrix expected to be positive definite is singular or indefinite.
class SingularityError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A quantity that must be strictly excited (a minimum eigenvalue, a
/// denominator built from covariances) is zero.
class ExcitationError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Iterative solver stopped before reaching its tolerance.
class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, double last_residual, long iterations)
        : NumericError(what), residual_(last_residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// An enumeration or search would exceed its configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// A hypothesis-class member produced a non-finite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Malformed or incomplete configuration (CLI layer).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sysid

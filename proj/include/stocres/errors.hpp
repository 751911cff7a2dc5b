#pragma once

#include <stdexcept>
#include <string>

namespace stocres {

/// Bad input: violated precondition, shape or schema problem. Maps to CLI exit status 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NotPsdError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnsupportedBasisError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Query outside the region where a quantity is defined (no extrapolation).
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Breakdown of a numerical method on valid input. Maps to CLI exit status 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace stocres

#pragma once

#include <stdexcept>
#include <string>

namespace qhawkes {

// Bad parameters or configuration. The CLI maps this to exit code 2.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnsupportedKernel : public DomainError {
public:
    using DomainError::DomainError;
};

// Failures that depend on the data or on the numerics. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientData : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EventCapExceeded : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace qhawkes

#pragma once

#include <stdexcept>
#include <string>

namespace fruitmap {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (negative depth, empty list, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Structured input failed validation (bad rotation, malformed dataset, label mismatch).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem or stream failure. The message always names the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

class InsufficientSupportError : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateSampleError : public DomainError {
public:
    using DomainError::DomainError;
};

class GenerationError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace fruitmap

#pragma once

#include <stdexcept>
#include <string>

namespace sparse_sr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A Gram or covariance factorization hit a pivot below the rank guard.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed PGM or CDL1 input.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A CDL1 file parsed but its atoms violate the stacked unit-norm invariant.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sparse_sr

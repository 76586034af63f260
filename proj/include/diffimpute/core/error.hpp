#pragma once

#include <stdexcept>
#include <string>

namespace diffimpute {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid options, missing paths.
class InputError : public Error {
public:
    using Error::Error;
};

/// Incompatible tensor or table shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A computation produced NaN/Inf or left its valid numeric domain.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An internal invariant did not hold.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace diffimpute

#pragma once

#include <stdexcept>
#include <string>

namespace rlfd {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A vector or matrix argument has the wrong shape.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument violates a documented precondition (not a distribution, out of range, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Something went wrong numerically (singular system, total underflow).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An operation needs exact dynamics but only a sampling oracle is available.
class OracleError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(want) +
                             " entries, got " + std::to_string(got));
    }
}

}  // namespace detail
}  // namespace rlfd

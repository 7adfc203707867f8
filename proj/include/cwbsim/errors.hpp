#pragma once

#include <stdexcept>
#include <string>

namespace cwbsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration value is out of range, unknown or malformed.
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// An input value (opinion, score, ...) violates a precondition.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A user id or aspect name does not exist.
class NotFound : public Error {
public:
    using Error::Error;
};

/// The requested measure has no defined value for this input
/// (isolated node, empty collection, all-missing aggregation).
class UndefinedMeasure : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cwbsim

#pragma once

#include <stdexcept>
#include <string>

namespace aidi {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, shapes or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A computation produced non-finite values or hit a division guard.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable files.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace aidi

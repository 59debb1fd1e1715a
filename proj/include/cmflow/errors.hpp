#pragma once

#include <stdexcept>
#include <string>

namespace cmflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid grid, out-of-domain evaluation point, bad derivative request.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated map archive.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A run lost positivity, produced a singular map or violated the CFL bound.
class NumericalAbort : public Error {
public:
    using Error::Error;
};

/// Rejected experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace cmflow

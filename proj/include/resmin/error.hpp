#pragma once

#include <stdexcept>
#include <string>

namespace resmin {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input data (bad mesh, out-of-range degree, malformed file, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A linear or nonlinear solve failed (singular system, Newton divergence, ...).
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace resmin

#pragma once

#include <stdexcept>
#include <string>

namespace fracpeak {

// exit codes of the driver hang off these
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad parameters, grid mismatch, violated preconditions
struct ConfigError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

// a stage asked for an artifact that an earlier stage never wrote
struct DependencyError : Error {
    using Error::Error;
};

} // namespace fracpeak

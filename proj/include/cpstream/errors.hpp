#pragma once

#include <stdexcept>
#include <string>

namespace cpstream {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, shape mismatches, parameter-bound violations.
struct ConfigError : Error {
    using Error::Error;
};

/// Numerical failures: rank deficiency, non-finite values, solver breakdown.
struct NumericError : Error {
    using Error::Error;
};

/// File and serialization failures, including checkpoint corruption.
struct IoError : Error {
    using Error::Error;
};

}  // namespace cpstream

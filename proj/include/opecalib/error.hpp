#pragma once

#include <stdexcept>
#include <string>

namespace opecalib {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, inconsistent datasets, violated preconditions,
// invalid configuration. The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Numerical failure while estimating or fitting (zero weight sums,
// divergence). The CLI maps these to exit code 3.
class EstimatorError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace opecalib

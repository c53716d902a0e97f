#pragma once

#include <stdexcept>
#include <string>

namespace stokesrve {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parameter bounds violated before any work started.
struct InvalidParams : Error {
    using Error::Error;
};

// RSA placement gave up after max_attempts consecutive rejections.
struct JammingFailure : Error {
    using Error::Error;
};

// Grid spacing cannot represent the inclusions (h > r/4, or h >= gap).
struct ResolutionTooCoarse : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct InconsistentInputs : Error {
    using Error::Error;
};

struct GridMismatch : Error {
    using Error::Error;
};

// An inclusion left no fluid unknowns to solve for.
struct SingularSystem : Error {
    using Error::Error;
};

struct NoConvergence : Error {
    NoConvergence(const std::string& what, int iterations_, double residual_)
        : Error(what), iterations(iterations_), residual(residual_) {}
    int iterations = 0;
    double residual = 0.0;
};

// Config file problems; message carries line/key diagnostics.
struct ConfigError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

}  // namespace stokesrve

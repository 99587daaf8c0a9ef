#pragma once

#include <stdexcept>
#include <string>

namespace cg {

/// Base class for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid geometry: windows that do not fit, non-divisible tessellations,
/// extent mismatches.
struct GeometryError : Error {
    using Error::Error;
};

/// Malformed or inconsistent input data: parse failures, vocabulary
/// mismatches, empty or misaligned corpora.
struct DataError : Error {
    using Error::Error;
};

/// Numerical failure of the model itself: degenerate likelihoods,
/// non-finite bounds.
struct ModelError : Error {
    using Error::Error;
};

}  // namespace cg

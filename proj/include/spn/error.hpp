#pragma once

#include <stdexcept>
#include <string>

namespace spn {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or semantically invalid model structure (bad ids, cycles,
/// failed validity gate on load, unknown variables or states).
struct ModelError : Error {
    using Error::Error;
};

/// Problems with datasets or model/dataset files: unreadable input,
/// parse errors, ragged rows, cells that do not match the schema.
struct DataError : Error {
    using Error::Error;
};

/// Numerical failures: zero-probability evidence, undefined derivatives,
/// NaN divergence during fitting, zero-mass renormalization.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace spn

#pragma once

#include <stdexcept>
#include <string>

namespace sparselab {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer extents do not line up.
struct ShapeError : Error {
  using Error::Error;
};

// Bad user-facing configuration (CLI exit code 1).
struct ConfigError : Error {
  using Error::Error;
};

// Missing/corrupt input files (CLI exit code 2).
struct DataError : Error {
  using Error::Error;
};

// NaN/Inf surfaced by a numeric operation (CLI exit code 3).
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace sparselab

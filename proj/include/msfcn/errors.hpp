#ifndef MSFCN_ERRORS_HPP
#define MSFCN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace msfcn {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible or invalid tensor/feature-map dimensions.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid argument or configuration value.
struct ValueError : Error {
  using Error::Error;
};

// Bad input data (labels out of range, empty split, ...).
struct DataError : Error {
  using Error::Error;
};

// Malformed file contents (checkpoint, PPM/PGM, JSON config).
struct FormatError : Error {
  using Error::Error;
};

// API misuse (backward on a non-scalar, wrong frame count, ...).
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values encountered during optimization.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace msfcn

#endif

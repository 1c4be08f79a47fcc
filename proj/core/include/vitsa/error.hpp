#pragma once

#include <stdexcept>
#include <string>

namespace vitsa {

// Base error for everything raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad dims, overflow-prone fixed-point setup, ...).
// CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// File / stream problems. CLI maps this to exit code 3.
struct IoError : Error {
  using Error::Error;
};

// Arithmetic left the configured accumulator width. Always a configuration
// or scheduling bug, never silent wraparound.
struct OverflowError : Error {
  using Error::Error;
};

}  // namespace vitsa

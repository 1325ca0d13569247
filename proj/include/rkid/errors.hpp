#pragma once

#include <stdexcept>

namespace rkid {

// Malformed input, inconsistent shapes or out-of-range configuration.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A state, stage or loss value left the finite range.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An inner iterative solve did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace rkid

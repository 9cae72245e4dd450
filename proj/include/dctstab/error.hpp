#pragma once

#include <stdexcept>
#include <string>

namespace dctstab {

/// Bad input data or arguments (unreadable file, size mismatch, violated precondition).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a usable result (degenerate fit, empty crop).
class ProcessingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dctstab

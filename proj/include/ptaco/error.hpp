#pragma once

#include <stdexcept>
#include <string>

namespace ptaco {

// Base of every error the library raises on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible or invalid tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An argument outside its documented domain (ids, counts, modes).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated, or unsupported files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training or synthesis.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace ptaco

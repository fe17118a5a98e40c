#pragma once

#include <stdexcept>
#include <string>

namespace mvi {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix / tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical routine could not produce a finite / converged result.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (config, CSV, edge list, checkpoint).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvi

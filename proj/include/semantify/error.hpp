#pragma once

#include <stdexcept>
#include <string>

namespace semantify {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed or inconsistent (bad archive, wrong widths, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Array shapes disagree.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// An input file or directory could not be found or read.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a meaningful result
/// (degenerate input, NaN loss, divergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument violates an operation precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace semantify

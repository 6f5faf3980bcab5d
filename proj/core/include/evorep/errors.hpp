#pragma once

#include <stdexcept>
#include <string>

namespace evorep {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: unreadable files, bad cells, invalid treatment values.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A configuration or precondition violation (bad fractions, empty arm, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shapes that do not line up (feature width, parameter blocks).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace evorep

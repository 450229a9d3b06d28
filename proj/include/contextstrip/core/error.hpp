#pragma once

#include <stdexcept>
#include <string>

namespace cstrip {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or axis sizes disagree with what an operation needs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied value lies outside its declared domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity reached a place that forbids it (loss, update, volume).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file content (NIfTI, checkpoint, config).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cstrip

#pragma once

#include <stdexcept>
#include <string>

namespace hsicnn {

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture, training or generator configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed cube, raster, checkpoint or manifest file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Index or coordinate outside its valid range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Data that cannot support the requested operation (empty sets, tiny classes).
class DataError : public Error {
 public:
  using Error::Error;
};

/// API called out of order or with an unsupported option.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsicnn

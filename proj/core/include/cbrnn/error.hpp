#pragma once

#include <stdexcept>
#include <string>

namespace cbrnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated audio container.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Well-formed container with an encoding we do not read.
class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class CacheError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbrnn

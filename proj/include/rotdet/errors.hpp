#pragma once

#include <stdexcept>
#include <string>

namespace rotdet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A box with non-finite coordinates or non-positive sides.
class InvalidBoxError : public Error {
 public:
  using Error::Error;
};

/// Index or coordinate outside a grid or image.
class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (JSON, key-value config). Carries the byte offset when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), byte_offset_(byte_offset) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_ = 0;
};

/// Well-formed input that violates a schema or domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rotdet

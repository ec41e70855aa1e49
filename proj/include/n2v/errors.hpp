#pragma once

#include <stdexcept>
#include <string>

namespace n2v {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class LoadErrorKind { MalformedHeader, TruncatedPayload, UnsupportedFormat };

/// Raised when decoding an image file fails.
class LoadError : public Error {
 public:
  LoadError(LoadErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  LoadErrorKind kind() const noexcept { return kind_; }

 private:
  LoadErrorKind kind_;
};

/// Raised by checkpoint decoding (bad magic, version, truncation, inconsistent shapes).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace n2v

#pragma once

#include <stdexcept>
#include <string>

namespace cresmd {

// Root of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A degradation level, condition value or configuration field outside its
// declared range.
class RangeError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed content in an otherwise readable input (PPM headers, config
// files, request bodies).
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during a forward pass, or a diverging loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the autodiff tape (non-scalar loss, detached tensor, missing
// gradient).
class GraphError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kNotACheckpoint, kVersion, kArchitectureMismatch, kTruncated, kCorrupt };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cresmd

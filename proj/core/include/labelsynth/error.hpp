#pragma once

#include <stdexcept>
#include <string>

namespace labelsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spatial or plane-count disagreement between inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A class ID outside [0, num_classes).
class InvalidLabelError : public Error {
 public:
  using Error::Error;
};

/// A present instance has no style vector assigned.
class IncompleteStyleError : public Error {
 public:
  using Error::Error;
};

/// A dataset sample whose label, instance, and image files disagree.
class CorruptSampleError : public Error {
 public:
  CorruptSampleError(std::string sample_id, const std::string& what)
      : Error("corrupt sample '" + sample_id + "': " + what), sample_id_(std::move(sample_id)) {}
  const std::string& sample_id() const noexcept { return sample_id_; }

 private:
  std::string sample_id_;
};

/// Malformed architecture string; `position` is the zero-based token index.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error("token " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Style selection that cannot be resolved against the catalog.
class SelectionError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint archive failed validation.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Loss or activation became NaN/Inf during training.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or flag combination rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace labelsynth

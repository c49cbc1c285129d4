#pragma once

#include <stdexcept>
#include <string>

namespace xtamer {

/// Tensor or parameter shapes that do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed textual input. `field()` names the offending part.
class ParseError : public std::invalid_argument {
 public:
  ParseError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Checkpoint payload failed its integrity check (truncation, bit rot).
class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint has the wrong magic, format version, or section layout.
class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xtamer

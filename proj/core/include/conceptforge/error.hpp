#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conceptforge {

/// Malformed or inconsistent input data (bad annotation line, channel mismatch, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file that does not follow its declared layout. Carries the byte
/// offset at which parsing failed.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }
  /// The message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// A vector whose norm is too small to define a direction.
class DegenerateVectorError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace conceptforge

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snaplabel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a precondition or domain invariant.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed under its declared format. `offset` is a line
/// number for text formats and a byte offset for binary ones.
class FormatError : public Error {
 public:
  enum class Unit { kLine, kByte };

  FormatError(const std::string& what, Unit unit, std::size_t offset)
      : Error(what + (unit == Unit::kLine ? " (line " : " (byte ") +
              std::to_string(offset) + ")"),
        unit_(unit),
        offset_(offset) {}

  Unit unit() const noexcept { return unit_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Unit unit_;
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed detector payload or a detection that violates the protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Detector could not be reached. Callers may retry.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts = 1)
      : Error(what), attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace snaplabel

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stochastok {

// Every error the library raises derives from Error. The CLI maps the class
// name onto a single-line "error[<kind>]: <message>" prefix.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

#define STOCHASTOK_ERROR_CLASS(Name, Kind)                              \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(what) {}             \
    const char* kind() const noexcept override { return Kind; }         \
  };

STOCHASTOK_ERROR_CLASS(ParseError, "parse")
STOCHASTOK_ERROR_CLASS(IntegrityError, "integrity")
STOCHASTOK_ERROR_CLASS(ConfigError, "config")
STOCHASTOK_ERROR_CLASS(CapacityError, "capacity")
STOCHASTOK_ERROR_CLASS(IoError, "io")
STOCHASTOK_ERROR_CLASS(FormatError, "format")
STOCHASTOK_ERROR_CLASS(VersionError, "version")
STOCHASTOK_ERROR_CLASS(TruncationError, "truncated")
STOCHASTOK_ERROR_CLASS(CorruptHeaderError, "corrupt-header")

#undef STOCHASTOK_ERROR_CLASS

/// Unknown token id, carrying the id and its position in the sequence.
class LookupError : public Error {
 public:
  LookupError(std::uint32_t id, std::size_t position)
      : Error("unknown token id " + std::to_string(id) + " at position " +
              std::to_string(position)),
        id_(id),
        position_(position) {}
  const char* kind() const noexcept override { return "lookup"; }
  std::uint32_t id() const noexcept { return id_; }
  std::size_t position() const noexcept { return position_; }

 private:
  std::uint32_t id_;
  std::size_t position_;
};

/// A byte of input text has no single-byte token.
class CoverageError : public Error {
 public:
  CoverageError(unsigned char byte, std::size_t offset)
      : Error("byte 0x" + hex(byte) + " at offset " + std::to_string(offset) +
              " has no single-byte token"),
        byte_(byte),
        offset_(offset) {}
  const char* kind() const noexcept override { return "coverage"; }
  unsigned char byte() const noexcept { return byte_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  static std::string hex(unsigned char b) {
    static constexpr char digits[] = "0123456789abcdef";
    return {digits[b >> 4], digits[b & 15]};
  }
  unsigned char byte_;
  std::size_t offset_;
};

}  // namespace stochastok

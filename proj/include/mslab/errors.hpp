#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mslab {

// Base of every error the library throws. The subclasses map onto the
// failure classes callers are expected to distinguish (the CLI turns them
// into exit codes).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyOverlap : public Error {
 public:
  using Error::Error;
};

class RegistrationFailed : public Error {
 public:
  RegistrationFailed(const std::string& what, int slab_index = -1)
      : Error(what), slab_index_(slab_index) {}
  int slab_index() const noexcept { return slab_index_; }

 private:
  int slab_index_;
};

class EmptyROI : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace mslab

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forge {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. Carries the 1-based line (0 when not line-oriented)
/// and the offending field, when known.
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line = 0, std::string field = {})
      : Error(decorate(message, line, field)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string decorate(const std::string& msg, std::size_t line, const std::string& field) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + msg;
  }

  std::size_t line_;
  std::string field_;
};

/// Input parsed but breaks a domain rule.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Lattice is not a DAG or has unreachable leaves.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Unknown identifier, member or band.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Corrupt binary container (zip, tiff, png).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace forge

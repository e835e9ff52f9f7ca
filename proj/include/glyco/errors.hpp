#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glyco {

/// Malformed user input: files, settings, command-line values.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Syntax error in a linear glycan encoding, carrying the byte offset.
class ParseError : public InputError {
public:
  ParseError(const std::string& what, std::size_t offset)
      : InputError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Error tied to a line of a line-oriented file.
class LineError : public InputError {
public:
  LineError(const std::string& what, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace glyco

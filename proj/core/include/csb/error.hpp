#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& message);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// A structured value failed schema or range validation. `field()` names the
// offending field using dotted paths, e.g. "dimensions.switching_density".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message);

  const std::string& field() const noexcept { return field_; }
  // The message without the field prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string field_;
  std::string detail_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace csb

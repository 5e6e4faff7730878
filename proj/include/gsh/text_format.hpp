#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsh/gs_array.hpp"

namespace gsh {

/// Malformed matrix text; line() is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Four lines of n' characters from {'+', '-'}, one per segment.
void write_array(std::ostream& os, const GsArray& a);

/// Arrays separated by exactly one blank line.
void write_arrays(std::ostream& os, std::span<const GsArray> arrays);
std::string format_arrays(std::span<const GsArray> arrays);

/// Inverse of write_arrays. Accepts CRLF line endings and trailing blank
/// lines; all arrays in one stream may have different orders.
std::vector<GsArray> read_arrays(std::istream& is);
std::vector<GsArray> parse_arrays(const std::string& text);

}  // namespace gsh

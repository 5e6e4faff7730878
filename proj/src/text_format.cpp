#include "gsh/text_format.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace gsh {

void write_array(std::ostream& os, const GsArray& a) {
  const std::string key = a.key();
  const auto len = static_cast<std::size_t>(a.segment_length());
  for (std::size_t i = 0; i < 4; ++i) os << key.substr(i * len, len) << '\n';
}

void write_arrays(std::ostream& os, std::span<const GsArray> arrays) {
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (i > 0) os << '\n';
    write_array(os, arrays[i]);
  }
}

std::string format_arrays(std::span<const GsArray> arrays) {
  std::ostringstream os;
  write_arrays(os, arrays);
  return os.str();
}

std::vector<GsArray> read_arrays(std::istream& is) {
  std::vector<GsArray> out;
  std::vector<std::string> block;
  int block_start = 0;
  int line_no = 0;

  auto flush = [&]() {
    if (block.empty()) return;
    if (block.size() != 4) {
      throw ParseError(block_start, "expected 4 segment lines, got " + std::to_string(block.size()));
    }
    const std::size_t len = block[0].size();
    std::vector<std::int8_t> entries;
    entries.reserve(4 * len);
    for (std::size_t i = 0; i < 4; ++i) {
      if (block[i].size() != len) {
        throw ParseError(block_start + static_cast<int>(i),
                         "segment length " + std::to_string(block[i].size()) + " differs from " +
                             std::to_string(len));
      }
      for (char c : block[i]) entries.push_back(c == '+' ? 1 : -1);
    }
    out.emplace_back(static_cast<int>(4 * len), std::move(entries));
    block.clear();
  };

  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    for (char c : line) {
      if (c != '+' && c != '-') {
        throw ParseError(line_no, std::string("unexpected character '") + c + "'");
      }
    }
    if (block.empty()) block_start = line_no;
    if (block.size() == 4) throw ParseError(line_no, "more than 4 lines without a blank separator");
    block.push_back(line);
  }
  flush();
  return out;
}

std::vector<GsArray> parse_arrays(const std::string& text) {
  std::istringstream is(text);
  return read_arrays(is);
}

}  // namespace gsh

#include "gsh/gs_array.hpp"

#include <stdexcept>

namespace gsh {

void check_order(int n) {
  if (n < 4 || n % 4 != 0) {
    throw std::invalid_argument("order n=" + std::to_string(n) +
                                " must be a positive multiple of 4");
  }
}

GsArray::GsArray(int n) : n_(n) {
  check_order(n);
  entries_.assign(static_cast<std::size_t>(n), std::int8_t{1});
}

GsArray::GsArray(int n, std::vector<std::int8_t> entries)
    : n_(n), entries_(std::move(entries)) {
  check_order(n);
  if (entries_.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("GsArray of order " + std::to_string(n) +
                                " needs " + std::to_string(n) + " entries, got " +
                                std::to_string(entries_.size()));
  }
  for (auto e : entries_) {
    if (e != 1 && e != -1) throw std::invalid_argument("GsArray entries must be +1 or -1");
  }
}

void GsArray::set(int segment, int k, std::int8_t value) {
  if (value != 1 && value != -1) throw std::invalid_argument("GsArray entries must be +1 or -1");
  entries_[static_cast<std::size_t>(segment * segment_length() + k)] = value;
}

std::string GsArray::key() const {
  std::string s(entries_.size(), '+');
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i] < 0) s[i] = '-';
  }
  return s;
}

std::strong_ordering operator<=>(const GsArray& a, const GsArray& b) {
  if (auto c = a.n_ <=> b.n_; c != 0) return c;
  // -1 sorts after +1, matching key() order.
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i] != b.entries_[i]) {
      return a.entries_[i] > b.entries_[i] ? std::strong_ordering::less
                                            : std::strong_ordering::greater;
    }
  }
  return std::strong_ordering::equal;
}

}  // namespace gsh

#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gsh {

inline constexpr int kSegments = 4;

/// First rows of the four circulant blocks of a Goethals-Seidel array.
///
/// Entries are stored segment-major: entry (i, k) lives at i * n' + k,
/// with n' = n / 4. Every entry is exactly -1 or +1.
class GsArray {
 public:
  GsArray() = default;

  /// All-(+1) array of order n. Throws std::invalid_argument unless n >= 4
  /// and n % 4 == 0.
  explicit GsArray(int n);

  /// Takes ownership of 4 * n' entries in segment-major order.
  GsArray(int n, std::vector<std::int8_t> entries);

  int order() const { return n_; }
  int segment_length() const { return n_ / 4; }

  std::int8_t at(int segment, int k) const {
    return entries_[static_cast<std::size_t>(segment * segment_length() + k)];
  }
  void set(int segment, int k, std::int8_t value);
  void flip(int segment, int k) {
    auto& e = entries_[static_cast<std::size_t>(segment * segment_length() + k)];
    e = static_cast<std::int8_t>(-e);
  }

  std::span<const std::int8_t> segment(int i) const {
    return std::span<const std::int8_t>(entries_).subspan(
        static_cast<std::size_t>(i * segment_length()),
        static_cast<std::size_t>(segment_length()));
  }
  std::span<const std::int8_t> entries() const { return entries_; }

  /// The text-format rendering: 4 * n' characters from {'+', '-'}. Since
  /// '+' < '-' in ASCII this orders +1 before -1, which is the order used
  /// by canonical forms and selection tie-breaks.
  std::string key() const;

  friend bool operator==(const GsArray&, const GsArray&) = default;
  friend std::strong_ordering operator<=>(const GsArray& a, const GsArray& b);

 private:
  int n_ = 0;
  std::vector<std::int8_t> entries_;
};

/// Throws std::invalid_argument unless n is a positive multiple of 4.
void check_order(int n);

}  // namespace gsh

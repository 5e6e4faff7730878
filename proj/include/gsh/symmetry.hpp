#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gsh/gs_array.hpp"
#include "gsh/rng.hpp"

namespace gsh {

/// Units of Z/n'Z in increasing order; {1} for n' = 1.
std::vector<int> units(int length);

/// An element of H = (D_{2n'} x Z_2)^4 x| (S_4 x Aut(Z/n'Z)).
///
/// Acting on an array, entry j of segment i moves to position
/// shift_i + e_i * unit * j (mod n') of segment perm_i, with e_i = -1 when
/// the segment is reversed, and is negated when negate_i is set. This is
/// the composite of: the unit relabelling, then per-segment reversal, then
/// shift, then negation, then the segment permutation.
class SymmetryElement {
 public:
  static SymmetryElement identity(int length);

  /// Throws std::invalid_argument if unit is not invertible mod length or
  /// perm is not a permutation of {0,1,2,3}.
  SymmetryElement(int length, int unit, std::array<int, 4> shift, std::array<bool, 4> reverse,
                  std::array<bool, 4> negate, std::array<int, 4> perm);

  int length() const { return length_; }
  int unit() const { return unit_; }
  const std::array<int, 4>& shift() const { return shift_; }
  const std::array<bool, 4>& reverse() const { return reverse_; }
  const std::array<bool, 4>& negate() const { return negate_; }
  const std::array<int, 4>& perm() const { return perm_; }

  GsArray apply(const GsArray& a) const;

  /// (*this) o first: apply `first`, then *this.
  SymmetryElement after(const SymmetryElement& first) const;
  SymmetryElement inverse() const;

  friend bool operator==(const SymmetryElement&, const SymmetryElement&) = default;

 private:
  SymmetryElement() = default;

  int length_ = 1;
  int unit_ = 1;
  std::array<int, 4> shift_{};
  std::array<bool, 4> reverse_{};
  std::array<bool, 4> negate_{};
  std::array<int, 4> perm_{0, 1, 2, 3};
};

inline SymmetryElement operator*(const SymmetryElement& second, const SymmetryElement& first) {
  return second.after(first);
}

/// Uniform over H: independent uniform shifts, reversal and negation
/// bits, permutation and unit.
SymmetryElement random_element(int length, Rng& rng);

/// Distinguished representative of the H-orbit of a. For each unit u the
/// array is relabelled by u, every segment is replaced by its least image
/// under rotation, reversal and negation (Booth's least rotation, +1 before
/// -1), the four segments are sorted, and the minimum over u is returned.
GsArray canonicalize(const GsArray& a);

/// Canonical forms of the population, one per orbit, in order of first
/// occurrence.
std::vector<GsArray> dedup(std::span<const GsArray> population);

/// |Stab_H(a)| in the group acting faithfully on arrays. Exact for every n'.
std::int64_t stabilizer_order(const GsArray& a);

/// Order of H as a group of transformations of arrays of this length
/// (i.e. after dividing out the elements that act trivially).
std::int64_t effective_group_order(int length);

}  // namespace gsh

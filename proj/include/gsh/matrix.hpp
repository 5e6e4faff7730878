#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsh/gs_array.hpp"

namespace gsh {

/// Dense row-major integer matrix.
struct IntMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> values;

  IntMatrix() = default;
  IntMatrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0) {}

  std::int64_t& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  std::int64_t operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

/// Circulant whose row r is x_{(c - r) mod n'}.
IntMatrix circulant(std::span<const std::int8_t> first_row);

/// The n x n Goethals-Seidel matrix
///
///     A    BF   CF   DF
///    -BF   A   -FD   FC
///    -CF   FD   A   -FB
///    -DF  -FC   FB   A
///
/// with F the antidiagonal permutation (F[r][c] = 1 iff r + c = n' - 1).
IntMatrix build_matrix(const GsArray& a);

/// X * X^T in exact integers.
IntMatrix gram(const IntMatrix& x);

/// True iff m * m^T = n * I, computed in exact integer arithmetic.
/// Throws std::invalid_argument for non-square input or an entry other
/// than -1 or +1.
bool verify_hadamard(const IntMatrix& m);

}  // namespace gsh

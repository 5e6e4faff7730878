#include "gsh/matrix.hpp"

#include <stdexcept>

namespace gsh {

IntMatrix circulant(std::span<const std::int8_t> first_row) {
  const int len = static_cast<int>(first_row.size());
  IntMatrix x(len, len);
  for (int r = 0; r < len; ++r) {
    for (int c = 0; c < len; ++c) x(r, c) = first_row[static_cast<std::size_t>((c - r + len) % len)];
  }
  return x;
}

namespace {

// Which block sits at (block_row, block_col), its sign, and whether F
// multiplies on the left or the right.
struct BlockSpec {
  int segment;
  int sign;
  enum { kPlain, kRightF, kLeftF } f;
};

constexpr BlockSpec kLayout[4][4] = {
    {{0, 1, BlockSpec::kPlain}, {1, 1, BlockSpec::kRightF}, {2, 1, BlockSpec::kRightF}, {3, 1, BlockSpec::kRightF}},
    {{1, -1, BlockSpec::kRightF}, {0, 1, BlockSpec::kPlain}, {3, -1, BlockSpec::kLeftF}, {2, 1, BlockSpec::kLeftF}},
    {{2, -1, BlockSpec::kRightF}, {3, 1, BlockSpec::kLeftF}, {0, 1, BlockSpec::kPlain}, {1, -1, BlockSpec::kLeftF}},
    {{3, -1, BlockSpec::kRightF}, {2, -1, BlockSpec::kLeftF}, {1, 1, BlockSpec::kLeftF}, {0, 1, BlockSpec::kPlain}},
};

}  // namespace

IntMatrix build_matrix(const GsArray& a) {
  const int n = a.order();
  const int len = a.segment_length();
  IntMatrix m(n, n);
  for (int br = 0; br < 4; ++br) {
    for (int bc = 0; bc < 4; ++bc) {
      const BlockSpec& spec = kLayout[br][bc];
      auto row = a.segment(spec.segment);
      for (int r = 0; r < len; ++r) {
        for (int c = 0; c < len; ++c) {
          // (XF)[r][c] = X[r][n'-1-c], (FX)[r][c] = X[n'-1-r][c].
          int rr = r, cc = c;
          if (spec.f == BlockSpec::kRightF) cc = len - 1 - c;
          if (spec.f == BlockSpec::kLeftF) rr = len - 1 - r;
          m(br * len + r, bc * len + c) = spec.sign * row[static_cast<std::size_t>((cc - rr + len) % len)];
        }
      }
    }
  }
  return m;
}

IntMatrix gram(const IntMatrix& x) {
  IntMatrix g(x.rows, x.rows);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = i; j < x.rows; ++j) {
      std::int64_t acc = 0;
      for (int k = 0; k < x.cols; ++k) acc += x(i, k) * x(j, k);
      g(i, j) = acc;
      g(j, i) = acc;
    }
  }
  return g;
}

bool verify_hadamard(const IntMatrix& m) {
  if (m.rows != m.cols) throw std::invalid_argument("verify_hadamard: matrix is not square");
  for (auto v : m.values) {
    if (v != 1 && v != -1) throw std::invalid_argument("verify_hadamard: entry is not +1 or -1");
  }
  const int n = m.rows;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      std::int64_t acc = 0;
      for (int k = 0; k < n; ++k) acc += m(i, k) * m(j, k);
      if (acc != 0) return false;
    }
  }
  // Diagonal entries are n automatically for a +-1 matrix.
  return true;
}

}  // namespace gsh

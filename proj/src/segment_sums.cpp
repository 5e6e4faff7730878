#include "gsh/segment_sums.hpp"

#include <algorithm>
#include <cstdlib>

namespace gsh {

SegmentSums segment_sums(const GsArray& a) {
  SegmentSums k{};
  for (int i = 0; i < kSegments; ++i) {
    for (auto e : a.segment(i)) k[static_cast<std::size_t>(i)] += e;
  }
  return k;
}

int sum_of_squares(const SegmentSums& k) {
  int s = 0;
  for (int v : k) s += v * v;
  return s;
}

SegmentSums sorted_abs(SegmentSums k) {
  for (auto& v : k) v = std::abs(v);
  std::sort(k.begin(), k.end());
  return k;
}

std::vector<SegmentSums> segment_sum_solutions(int n) {
  check_order(n);
  const int parity = (n / 4) % 2;
  std::vector<SegmentSums> out;
  for (int a = parity; a * a <= n; a += 2) {
    for (int b = a; a * a + b * b <= n; b += 2) {
      for (int c = b; a * a + b * b + c * c <= n; c += 2) {
        for (int d = c; a * a + b * b + c * c + d * d <= n; d += 2) {
          if (a * a + b * b + c * c + d * d == n) out.push_back({a, b, c, d});
        }
      }
    }
  }
  return out;
}

bool is_segment_sum_solution(int n, const SegmentSums& k) {
  const auto sols = segment_sum_solutions(n);
  return std::find(sols.begin(), sols.end(), sorted_abs(k)) != sols.end();
}

}  // namespace gsh

#pragma once

#include <array>
#include <vector>

#include "gsh/gs_array.hpp"

namespace gsh {

/// k_i = sum_j a_{i,j}. Every Hadamard GS array has sum k_i^2 = n.
using SegmentSums = std::array<int, kSegments>;

SegmentSums segment_sums(const GsArray& a);

int sum_of_squares(const SegmentSums& k);

/// Sorted absolute values, the form that is invariant under the symmetry
/// group.
SegmentSums sorted_abs(SegmentSums k);

/// All nondecreasing quadruples of nonnegative integers with k_i of the
/// same parity as n' and sum k_i^2 = n, in lexicographic order.
std::vector<SegmentSums> segment_sum_solutions(int n);

/// True if |k| (sorted) is one of segment_sum_solutions(n). Signs are
/// allowed and ignored.
bool is_segment_sum_solution(int n, const SegmentSums& k);

}  // namespace gsh

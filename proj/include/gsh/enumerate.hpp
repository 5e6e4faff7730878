#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsh/gs_array.hpp"

namespace gsh {

inline constexpr int kMaxEnumerateOrder = 36;
inline constexpr int kMaxBruteForceOrder = 20;

struct EnumerateOptions {
  /// Collect every Hadamard first-row quadruple (disables the first-segment
  /// reduction, so only sensible for small n).
  bool keep_arrays = false;
  /// Also count distinct canonical forms.
  bool orbit_count = true;
  /// Level t of the search fills segment segment_order[t].
  std::array<int, 4> segment_order{0, 1, 2, 3};
};

struct EnumerateResult {
  int n = 0;
  /// Raw first-row quadruples whose GS matrix is Hadamard.
  std::int64_t count = 0;
  /// Distinct canonical forms; -1 when not requested.
  std::int64_t orbit_count = -1;
  /// Leaves examined by both checkers (each weighted once, not by orbit).
  std::int64_t candidates = 0;
  /// Leaves where the exact and the spectral checker disagree.
  std::int64_t disagreements = 0;
  double seconds = 0.0;
  std::vector<GsArray> arrays;
};

/// Checker (a): M * M^T = n I in exact integers.
bool exact_check(const GsArray& a);
/// Checker (b): |n P_j - n| < 1e-6 for every frequency.
bool spectral_check(const GsArray& a);

/// Counts GS-type Hadamard first rows of order n by segment-by-segment
/// extension. Partial assignments are cut when sum k_i^2 can no longer reach
/// n or a partial power sum_{i<=t} |lambda_{i,j}|^2 exceeds n; the last
/// segment is looked up by its periodic autocorrelation, which must cancel
/// that of the first three. The first segment ranges over representatives
/// under rotation, reversal and negation, weighted by class size. Every
/// leaf is classified by both checkers; the count uses the exact one.
///
/// Throws std::invalid_argument unless n is a multiple of 4 in
/// [4, kMaxEnumerateOrder].
EnumerateResult enumerate_gs(int n, const EnumerateOptions& options = {});

struct BruteForceResult {
  std::int64_t exact = 0;
  std::int64_t spectral = 0;
  std::int64_t disagreements = 0;
};

/// Both checkers over all 2^n arrays. n <= kMaxBruteForceOrder.
BruteForceResult brute_force_count(int n);

/// exp of the least-squares slope of log(count) against n. Needs at least
/// four consecutive orders (n stepping by 4) with positive counts.
double growth_report(std::span<const std::pair<int, double>> counts);

/// CSV with columns n,count,orbit_count,seconds.
std::string enumeration_csv(std::span<const EnumerateResult> results);

}  // namespace gsh

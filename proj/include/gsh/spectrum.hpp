#pragma once

#include <limits>
#include <span>
#include <vector>

#include "gsh/dft.hpp"
#include "gsh/gs_array.hpp"

namespace gsh {

/// Fourier modes lambda_{i,j} = sum_k a_{i,k} w^{jk} of the four segments and
/// the per-frequency power P_j = (1/n) sum_i |lambda_{i,j}|^2.
///
/// A GS array is Hadamard exactly when P_j = 1 for every j.
struct Spectrum {
  int order = 0;
  int length = 0;
  std::vector<cplx> modes;   // modes[i * length + j]
  std::vector<double> power;

  cplx mode(int segment, int j) const {
    return modes[static_cast<std::size_t>(segment * length + j)];
  }
};

Spectrum spectrum(const GsArray& a);

/// Recomputes power from modes.
void refresh_power(Spectrum& sp);

/// n * P_j below this is treated as an exact zero mode.
inline constexpr double kZeroPowerTolerance = 1e-9;
inline constexpr double kInfiniteScore = std::numeric_limits<double>::infinity();

/// f(P - 1) with f(u) = u - log(1 + u); +inf for a vanishing mode.
double score_term(double power, int order);

/// S = sum_j f(P_j - 1). Throws std::domain_error on a non-finite or
/// negative power entry.
double score(std::span<const double> power, int order);
double score(const Spectrum& sp);
double score(const GsArray& a);

/// Scores below this are candidates for the exact Hadamard check.
inline constexpr double kHadamardScoreThreshold = 1e-9;

}  // namespace gsh

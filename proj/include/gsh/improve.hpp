#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsh/gs_array.hpp"
#include "gsh/tempering.hpp"

namespace gsh {

struct ImproveConfig {
  int multi_bit_top = 8;
  int max_multi_bit_width = 3;
  double resample_jitter = 0.3;
  /// Resampling passes over the four segments per round.
  int resample_passes = 2;
  int tempering_sweeps = 10;
  /// Keep every segment sum fixed (segment_sums mode).
  bool preserve_sums = false;
  /// Greedy constrained proposals per round in segment_sums mode, as a
  /// multiple of n.
  int constrained_moves_per_n = 2;
};

/// Local descent to a point where neither single flips (or sum-preserving
/// swaps) nor any multi-bit combination strictly improves.
void descend(SearchState& state, const ImproveConfig& config);

/// One improvement pass over a population. If num_improve > 0 a tempering
/// run over the ladder comes first (candidates grouped rung-major, the
/// remainder that does not fill a full group skips it; each slot keeps the
/// best state it reached). Then max(1, num_improve) rounds of descent,
/// multi-bit steps and segment resampling are applied to every candidate.
/// Scores never increase and the population size is unchanged.
struct ImproveResult {
  std::vector<GsArray> arrays;
  std::vector<double> scores;
};

ImproveResult improve(std::span<const GsArray> population, int num_improve,
                      const ImproveConfig& config, TemperatureLadder& ladder, std::uint64_t seed);

}  // namespace gsh

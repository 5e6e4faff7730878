#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsh/gs_array.hpp"
#include "gsh/rng.hpp"
#include "gsh/spectrum.hpp"

namespace gsh {

struct Flip {
  int segment;
  int index;
};

/// An array together with its spectrum and score, kept in sync under
/// incremental updates lambda'_{i,j} = lambda_{i,j} - 2 a_{i,k} w^{jk}.
class SearchState {
 public:
  /// Applied moves between exact spectrum recomputations.
  static constexpr int kResyncInterval = 64;

  SearchState() = default;
  explicit SearchState(GsArray a);

  const GsArray& array() const { return array_; }
  const Spectrum& spectrum() const { return spectrum_; }
  double score() const { return score_; }

  /// Score after flipping all listed (distinct) entries; O(n' * |flips|).
  double score_after(std::span<const Flip> flips) const;

  void apply(std::span<const Flip> flips);

  /// Exact recomputation of spectrum and score.
  void resync();

 private:
  GsArray array_;
  Spectrum spectrum_;
  double score_ = 0.0;
  int moves_since_resync_ = 0;
};

/// Strict improvement margin used by all greedy steps.
inline constexpr double kImproveEpsilon = 1e-12;

/// new < current by more than kImproveEpsilon; an infinite current score is
/// improved by any finite one.
bool improves(double candidate, double current);

/// Score after flipping a_{i,k}.
double flip_score(const SearchState& state, int segment, int index);

/// Repeatedly applies the best strictly improving single flip (lowest
/// (segment, index) among ties) until none exists. Returns flips applied.
int one_bit_descent(SearchState& state);

/// Segment-sum-preserving descent: best strictly improving exchange of a
/// +1 and a -1 inside one segment. Returns moves applied.
int swap_descent(SearchState& state);

/// Ranks single flips by flip_score, evaluates every width-subset of the
/// top_m, applies the best if it strictly improves. With preserve_sums only
/// subsets that keep every segment sum are considered.
bool multi_bit_step(SearchState& state, int width, int top_m = 8, bool preserve_sums = false);

/// The +-1 segment proposed by segment_resample, without acceptance.
std::vector<std::int8_t> resample_proposal(const SearchState& state, int segment, double jitter,
                                           Rng& rng, bool preserve_sum = false);

/// Replaces one segment by the sign of the inverse DFT of its Hadamard
/// target spectrum t_j = sqrt(max(0, n - sum_{i' != i} |lambda_{i',j}|^2))
/// with the current phase jittered uniformly in [-jitter, jitter]. With
/// preserve_sum the closest +-1 vector with the current segment sum is used
/// instead of the plain sign. Accepted only on strict improvement.
bool segment_resample(SearchState& state, int segment, double jitter, Rng& rng,
                      bool preserve_sum = false);

/// Proposal that keeps every segment sum: an exchange of two entries of
/// one segment, or a cyclic rotation by one step of a random window of a
/// segment. Returned as the set of entries that change (possibly empty).
std::vector<Flip> propose_constrained(const GsArray& a, Rng& rng);

/// Proposes a constrained move and accepts it greedily (temperature <= 0)
/// or by the Metropolis rule. Returns whether the state changed.
bool constrained_move(SearchState& state, Rng& rng, double temperature = 0.0);

/// min(1, exp(-delta / T)) acceptance; delta <= 0 is always accepted.
bool metropolis_accept(double delta, double temperature, double u01);

/// Score difference that treats two infinite scores as equal.
double score_delta(double next, double current);

}  // namespace gsh

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsh/search.hpp"

namespace gsh {

/// Ascending temperatures for parallel tempering plus swap acceptance
/// counters per adjacent pair.
class TemperatureLadder {
 public:
  TemperatureLadder() = default;
  /// Throws std::invalid_argument unless there are at least two strictly
  /// increasing positive temperatures and 0 <= target_lo < target_hi <= 1.
  explicit TemperatureLadder(std::vector<double> temperatures, double target_lo = 0.2,
                             double target_hi = 0.4);
  static TemperatureLadder geometric(int rungs, double t_min, double t_max,
                                     double target_lo = 0.2, double target_hi = 0.4);

  int rungs() const { return static_cast<int>(temperatures_.size()); }
  std::span<const double> temperatures() const { return temperatures_; }
  double temperature(int rung) const { return temperatures_[static_cast<std::size_t>(rung)]; }
  double target_lo() const { return target_lo_; }
  double target_hi() const { return target_hi_; }

  void record_swap(int pair, bool accepted);
  /// Acceptance of the pair since the last autotune (NaN without attempts).
  double window_acceptance(int pair) const;
  std::int64_t total_attempts(int pair) const { return attempts_[static_cast<std::size_t>(pair)]; }
  std::int64_t total_accepts(int pair) const { return accepts_[static_cast<std::size_t>(pair)]; }

  /// Rescales each log-temperature gap by exp(gain * (acceptance - mid)),
  /// the factor clamped to [1/2, 2], keeping the coldest rung fixed; then
  /// clears the window counters. Pairs without attempts are left alone.
  void autotune(double gain = 2.0);

  std::span<const std::int64_t> attempts() const { return attempts_; }
  std::span<const std::int64_t> accepts() const { return accepts_; }
  std::span<const std::int64_t> window_attempts() const { return window_attempts_; }
  std::span<const std::int64_t> window_accepts() const { return window_accepts_; }

  std::vector<double>& mutable_temperatures() { return temperatures_; }
  std::vector<std::int64_t>& mutable_window_attempts() { return window_attempts_; }
  std::vector<std::int64_t>& mutable_window_accepts() { return window_accepts_; }
  std::vector<std::int64_t>& mutable_attempts() { return attempts_; }
  std::vector<std::int64_t>& mutable_accepts() { return accepts_; }

 private:
  std::vector<double> temperatures_;
  double target_lo_ = 0.2;
  double target_hi_ = 0.4;
  std::vector<std::int64_t> attempts_, accepts_;
  std::vector<std::int64_t> window_attempts_, window_accepts_;
};

/// min(1, exp((1/ta - 1/tb) * (sa - sb))): replica a at temperature ta
/// holding score sa trades with replica b.
bool swap_accept(double ta, double tb, double sa, double sb, double u01);

struct TemperingOptions {
  /// Metropolis proposals per replica per sweep; 0 means n.
  int moves_per_sweep = 0;
  /// Use segment-sum-preserving proposals instead of single flips.
  bool preserve_sums = false;
  bool autotune = true;
};

/// Parallel tempering over states laid out rung-major: replica b of rung
/// r is states[r * B + b]. Each sweep runs Metropolis moves on every
/// replica, then proposes swaps between equal-b replicas of adjacent rungs,
/// then (optionally) autotunes the ladder. If `best` is non-empty it must
/// match states in size and receives, per slot, the lowest-score state seen
/// at the end of any sweep. Randomness comes from streams keyed by
/// (seed, sweep, slot) so the result does not depend on thread count.
///
/// Throws std::invalid_argument if the ladder has fewer than two rungs or
/// states.size() is not a multiple of the rung count.
void tempering_sweep(std::span<SearchState> states, TemperatureLadder& ladder, int sweeps,
                     std::uint64_t seed, const TemperingOptions& options = {},
                     std::span<SearchState> best = {});

}  // namespace gsh

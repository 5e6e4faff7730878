#include "gsh/tempering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gsh {

TemperatureLadder::TemperatureLadder(std::vector<double> temperatures, double target_lo,
                                     double target_hi)
    : temperatures_(std::move(temperatures)), target_lo_(target_lo), target_hi_(target_hi) {
  if (temperatures_.size() < 2) throw std::invalid_argument("ladder needs at least two rungs");
  for (std::size_t r = 0; r < temperatures_.size(); ++r) {
    if (!(temperatures_[r] > 0.0)) throw std::invalid_argument("ladder temperatures must be positive");
    if (r > 0 && !(temperatures_[r] > temperatures_[r - 1])) {
      throw std::invalid_argument("ladder temperatures must be strictly increasing");
    }
  }
  if (!(0.0 <= target_lo && target_lo < target_hi && target_hi <= 1.0)) {
    throw std::invalid_argument("invalid swap acceptance target range");
  }
  const std::size_t pairs = temperatures_.size() - 1;
  attempts_.assign(pairs, 0);
  accepts_.assign(pairs, 0);
  window_attempts_.assign(pairs, 0);
  window_accepts_.assign(pairs, 0);
}

TemperatureLadder TemperatureLadder::geometric(int rungs, double t_min, double t_max,
                                               double target_lo, double target_hi) {
  if (rungs < 2) throw std::invalid_argument("ladder needs at least two rungs");
  std::vector<double> t(static_cast<std::size_t>(rungs));
  for (int r = 0; r < rungs; ++r) {
    t[static_cast<std::size_t>(r)] = t_min * std::pow(t_max / t_min, static_cast<double>(r) / (rungs - 1));
  }
  return TemperatureLadder(std::move(t), target_lo, target_hi);
}

void TemperatureLadder::record_swap(int pair, bool accepted) {
  const auto p = static_cast<std::size_t>(pair);
  ++attempts_[p];
  ++window_attempts_[p];
  if (accepted) {
    ++accepts_[p];
    ++window_accepts_[p];
  }
}

double TemperatureLadder::window_acceptance(int pair) const {
  const auto p = static_cast<std::size_t>(pair);
  if (window_attempts_[p] == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(window_accepts_[p]) / static_cast<double>(window_attempts_[p]);
}

void TemperatureLadder::autotune(double gain) {
  const double mid = 0.5 * (target_lo_ + target_hi_);
  std::vector<double> gaps(temperatures_.size() - 1);
  for (std::size_t p = 0; p < gaps.size(); ++p) {
    gaps[p] = std::log(temperatures_[p + 1] / temperatures_[p]);
    const double acc = window_acceptance(static_cast<int>(p));
    if (std::isnan(acc)) continue;
    // Too many swaps accepted means the rungs are too close.
    const double factor = std::clamp(std::exp(gain * (acc - mid)), 0.5, 2.0);
    gaps[p] = std::clamp(gaps[p] * factor, 1e-6, 30.0);
  }
  for (std::size_t p = 0; p < gaps.size(); ++p) {
    temperatures_[p + 1] = temperatures_[p] * std::exp(gaps[p]);
  }
  std::fill(window_attempts_.begin(), window_attempts_.end(), 0);
  std::fill(window_accepts_.begin(), window_accepts_.end(), 0);
}

bool swap_accept(double ta, double tb, double sa, double sb, double u01) {
  const double ds = score_delta(sa, sb);
  const double exponent = (1.0 / ta - 1.0 / tb) * ds;
  if (std::isnan(exponent) || exponent >= 0.0) return true;
  return u01 < std::exp(exponent);
}

void tempering_sweep(std::span<SearchState> states, TemperatureLadder& ladder, int sweeps,
                     std::uint64_t seed, const TemperingOptions& options,
                     std::span<SearchState> best) {
  const int rungs = ladder.rungs();
  if (rungs < 2) throw std::invalid_argument("tempering needs at least two rungs");
  if (states.size() % static_cast<std::size_t>(rungs) != 0) {
    throw std::invalid_argument("state count must be a multiple of the rung count");
  }
  if (!best.empty() && best.size() != states.size()) {
    throw std::invalid_argument("best buffer size does not match states");
  }
  if (states.empty()) return;
  const std::size_t per_rung = states.size() / static_cast<std::size_t>(rungs);
  const int len = states[0].array().segment_length();
  const int moves = options.moves_per_sweep > 0 ? options.moves_per_sweep : states[0].array().order();

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const auto sweep_id = static_cast<std::uint64_t>(sweep);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t slot = 0; slot < states.size(); ++slot) {
      Rng rng = make_stream({seed, sweep_id, slot, 0x6d6f7665});
      SearchState& st = states[slot];
      const double t = ladder.temperature(static_cast<int>(slot / per_rung));
      for (int m = 0; m < moves; ++m) {
        if (options.preserve_sums) {
          constrained_move(st, rng, t);
          continue;
        }
        const Flip f{uniform_index(rng, 4), uniform_index(rng, len)};
        const double next = st.score_after(std::span<const Flip>(&f, 1));
        if (metropolis_accept(score_delta(next, st.score()), t, uniform01(rng))) {
          st.apply(std::span<const Flip>(&f, 1));
        }
      }
    }

    Rng swap_rng = make_stream({seed, sweep_id, 0x73776170});
    for (int r = 0; r + 1 < rungs; ++r) {
      for (std::size_t b = 0; b < per_rung; ++b) {
        SearchState& lo = states[static_cast<std::size_t>(r) * per_rung + b];
        SearchState& hi = states[static_cast<std::size_t>(r + 1) * per_rung + b];
        const bool ok = swap_accept(ladder.temperature(r), ladder.temperature(r + 1), lo.score(),
                                    hi.score(), uniform01(swap_rng));
        ladder.record_swap(r, ok);
        if (ok) std::swap(lo, hi);
      }
    }
    if (options.autotune) ladder.autotune();

    if (!best.empty()) {
      for (std::size_t slot = 0; slot < states.size(); ++slot) {
        if (states[slot].score() < best[slot].score()) best[slot] = states[slot];
      }
    }
  }
}

}  // namespace gsh

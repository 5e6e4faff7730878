#include "gsh/improve.hpp"

#include <algorithm>

namespace gsh {

void descend(SearchState& state, const ImproveConfig& config) {
  while (true) {
    if (config.preserve_sums) {
      swap_descent(state);
    } else {
      one_bit_descent(state);
    }
    bool escaped = false;
    for (int w = 2; w <= config.max_multi_bit_width && !escaped; ++w) {
      escaped = multi_bit_step(state, w, config.multi_bit_top, config.preserve_sums);
    }
    if (!escaped) return;
  }
}

namespace {

void improve_round(SearchState& state, const ImproveConfig& config, Rng& rng) {
  descend(state, config);
  if (config.preserve_sums) {
    const int moves = config.constrained_moves_per_n * state.array().order();
    bool moved = false;
    for (int m = 0; m < moves; ++m) moved = constrained_move(state, rng, 0.0) || moved;
    if (moved) descend(state, config);
  }
  for (int pass = 0; pass < config.resample_passes; ++pass) {
    for (int i = 0; i < 4; ++i) {
      if (segment_resample(state, i, config.resample_jitter, rng, config.preserve_sums)) {
        descend(state, config);
      }
    }
  }
}

}  // namespace

ImproveResult improve(std::span<const GsArray> population, int num_improve,
                      const ImproveConfig& config, TemperatureLadder& ladder, std::uint64_t seed) {
  std::vector<SearchState> states(population.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t c = 0; c < population.size(); ++c) states[c] = SearchState(population[c]);

  if (num_improve > 0 && ladder.rungs() >= 2) {
    const std::size_t group = static_cast<std::size_t>(ladder.rungs());
    const std::size_t used = population.size() / group * group;
    if (used > 0) {
      std::span<SearchState> tempered(states.data(), used);
      std::vector<SearchState> best(tempered.begin(), tempered.end());
      TemperingOptions opts;
      opts.preserve_sums = config.preserve_sums;
      tempering_sweep(tempered, ladder, config.tempering_sweeps, stream_seed({seed, 0x74656d70}),
                      opts, best);
      std::move(best.begin(), best.end(), tempered.begin());
    }
  }

  const int rounds = std::max(1, num_improve);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t c = 0; c < states.size(); ++c) {
    Rng rng = make_stream({seed, c, 0x696d7072});
    for (int r = 0; r < rounds; ++r) improve_round(states[c], config, rng);
    states[c].resync();
  }

  ImproveResult out;
  out.arrays.reserve(states.size());
  out.scores.reserve(states.size());
  for (auto& s : states) {
    out.scores.push_back(s.score());
    out.arrays.push_back(s.array());
  }
  return out;
}

}  // namespace gsh

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gsh/search.hpp"

namespace gsh {

int one_bit_descent(SearchState& state) {
  const int len = state.array().segment_length();
  int applied = 0;
  while (true) {
    Flip best{-1, -1};
    double best_score = state.score();
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < len; ++k) {
        const double s = flip_score(state, i, k);
        if (improves(s, best_score)) {
          best_score = s;
          best = {i, k};
        }
      }
    }
    if (best.segment < 0) return applied;
    state.apply(std::span<const Flip>(&best, 1));
    ++applied;
  }
}

int swap_descent(SearchState& state) {
  const int len = state.array().segment_length();
  int applied = 0;
  while (true) {
    std::array<Flip, 2> best{Flip{-1, -1}, Flip{-1, -1}};
    double best_score = state.score();
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < len; ++k) {
        for (int l = k + 1; l < len; ++l) {
          if (state.array().at(i, k) == state.array().at(i, l)) continue;
          const std::array<Flip, 2> pair{Flip{i, k}, Flip{i, l}};
          const double s = state.score_after(pair);
          if (improves(s, best_score)) {
            best_score = s;
            best = pair;
          }
        }
      }
    }
    if (best[0].segment < 0) return applied;
    state.apply(best);
    ++applied;
  }
}

namespace {

bool preserves_sums(const GsArray& a, std::span<const Flip> flips) {
  std::array<int, 4> change{};
  for (const Flip& f : flips) change[static_cast<std::size_t>(f.segment)] += a.at(f.segment, f.index);
  return std::all_of(change.begin(), change.end(), [](int c) { return c == 0; });
}

}  // namespace

bool multi_bit_step(SearchState& state, int width, int top_m, bool preserve_sums) {
  const int len = state.array().segment_length();
  struct Ranked {
    double score;
    Flip flip;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(static_cast<std::size_t>(4 * len));
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < len; ++k) ranked.push_back({flip_score(state, i, k), {i, k}});
  }
  // stable_sort keeps index order among equal scores.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score < b.score; });
  const int m = std::min<int>(top_m, static_cast<int>(ranked.size()));
  if (width < 1 || width > m) return false;

  std::vector<int> idx(static_cast<std::size_t>(width));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Flip> subset(static_cast<std::size_t>(width));
  std::vector<Flip> best;
  double best_score = state.score();
  while (true) {
    for (int t = 0; t < width; ++t) subset[static_cast<std::size_t>(t)] = ranked[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])].flip;
    if (!preserve_sums || preserves_sums(state.array(), subset)) {
      const double s = state.score_after(subset);
      if (improves(s, best_score)) {
        best_score = s;
        best = subset;
      }
    }
    // Next combination in lexicographic order.
    int t = width - 1;
    while (t >= 0 && idx[static_cast<std::size_t>(t)] == m - width + t) --t;
    if (t < 0) break;
    ++idx[static_cast<std::size_t>(t)];
    for (int u = t + 1; u < width; ++u) idx[static_cast<std::size_t>(u)] = idx[static_cast<std::size_t>(u - 1)] + 1;
  }
  if (best.empty()) return false;
  state.apply(best);
  return true;
}

std::vector<std::int8_t> resample_proposal(const SearchState& state, int segment, double jitter,
                                           Rng& rng, bool preserve_sum) {
  const GsArray& a = state.array();
  const Spectrum& sp = state.spectrum();
  const int len = a.segment_length();
  const auto ulen = static_cast<std::size_t>(len);
  const double n = a.order();

  std::vector<cplx> target(ulen);
  for (int j = 0; j <= len / 2; ++j) {
    double others = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (i != segment) others += std::norm(sp.mode(i, j));
    }
    const double t = std::sqrt(std::max(0.0, n - others));
    const cplx cur = sp.mode(segment, j);
    const bool self_conjugate = j == 0 || 2 * j == len;
    if (self_conjugate) {
      target[static_cast<std::size_t>(j)] = cplx(cur.real() < 0.0 ? -t : t, 0.0);
    } else {
      const double phase = std::arg(cur) + (2.0 * uniform01(rng) - 1.0) * jitter;
      target[static_cast<std::size_t>(j)] = std::polar(t, phase);
      target[ulen - static_cast<std::size_t>(j)] = std::conj(target[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<cplx> values(ulen);
  dft_plan(ulen).inverse(target, values);

  std::vector<std::int8_t> next(ulen);
  if (preserve_sum) {
    int sum = 0;
    for (auto e : a.segment(segment)) sum += e;
    const int plus = (len + sum) / 2;
    std::vector<int> order(ulen);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return values[static_cast<std::size_t>(x)].real() > values[static_cast<std::size_t>(y)].real();
    });
    for (std::size_t r = 0; r < ulen; ++r) next[static_cast<std::size_t>(order[r])] = r < static_cast<std::size_t>(plus) ? 1 : -1;
  } else {
    for (std::size_t k = 0; k < ulen; ++k) next[k] = values[k].real() < 0.0 ? -1 : 1;
  }
  return next;
}

bool segment_resample(SearchState& state, int segment, double jitter, Rng& rng, bool preserve_sum) {
  const GsArray& a = state.array();
  const int len = a.segment_length();
  const auto next = resample_proposal(state, segment, jitter, rng, preserve_sum);
  std::vector<Flip> flips;
  for (int k = 0; k < len; ++k) {
    if (next[static_cast<std::size_t>(k)] != a.at(segment, k)) flips.push_back({segment, k});
  }
  if (flips.empty()) return false;
  if (!improves(state.score_after(flips), state.score())) return false;
  state.apply(flips);
  return true;
}

std::vector<Flip> propose_constrained(const GsArray& a, Rng& rng) {
  const int len = a.segment_length();
  std::vector<Flip> flips;
  if (len < 2) return flips;
  const int seg = uniform_index(rng, 4);
  if (uniform_index(rng, 2) == 0) {
    const int k = uniform_index(rng, len);
    int l = uniform_index(rng, len - 1);
    if (l >= k) ++l;
    if (a.at(seg, k) != a.at(seg, l)) flips = {{seg, k}, {seg, l}};
    return flips;
  }
  // Rotate the cyclic window [start, start + width) by one step.
  const int width = 2 + uniform_index(rng, len - 1);
  const int start = uniform_index(rng, len);
  const int dir = uniform_index(rng, 2) == 0 ? 1 : -1;
  for (int t = 0; t < width; ++t) {
    const int pos = (start + t) % len;
    const int src = (start + ((t - dir) % width + width) % width) % len;
    if (a.at(seg, pos) != a.at(seg, src)) flips.push_back({seg, pos});
  }
  return flips;
}

bool constrained_move(SearchState& state, Rng& rng, double temperature) {
  const auto flips = propose_constrained(state.array(), rng);
  if (flips.empty()) return false;
  const double next = state.score_after(flips);
  const bool accept = temperature <= 0.0
                          ? improves(next, state.score())
                          : metropolis_accept(score_delta(next, state.score()), temperature, uniform01(rng));
  if (accept) state.apply(flips);
  return accept;
}

}  // namespace gsh

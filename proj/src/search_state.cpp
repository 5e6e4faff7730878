#include "gsh/search.hpp"

#include <array>
#include <cmath>

namespace gsh {

SearchState::SearchState(GsArray a) : array_(std::move(a)) { resync(); }

void SearchState::resync() {
  spectrum_ = gsh::spectrum(array_);
  score_ = gsh::score(spectrum_);
  moves_since_resync_ = 0;
}

namespace {

// Power vector after the flips; the mode deltas are accumulated per
// segment so that several flips in one segment combine before |.|^2.
void updated_modes(const SearchState& s, std::span<const Flip> flips, std::vector<cplx>& delta,
                   std::array<bool, 4>& touched) {
  const int len = s.array().segment_length();
  const auto roots = dft_plan(static_cast<std::size_t>(len)).roots();
  delta.assign(4 * static_cast<std::size_t>(len), cplx{0.0, 0.0});
  touched = {};
  for (const Flip& f : flips) {
    touched[static_cast<std::size_t>(f.segment)] = true;
    const double amp = -2.0 * s.array().at(f.segment, f.index);
    cplx* d = delta.data() + static_cast<std::size_t>(f.segment * len);
    for (int j = 0; j < len; ++j) d[j] += amp * roots[static_cast<std::size_t>((j * f.index) % len)];
  }
}

}  // namespace

double SearchState::score_after(std::span<const Flip> flips) const {
  thread_local std::vector<cplx> delta;
  std::array<bool, 4> touched{};
  updated_modes(*this, flips, delta, touched);
  const int len = spectrum_.length;
  const double inv_n = 1.0 / spectrum_.order;
  double s = 0.0;
  for (int j = 0; j < len; ++j) {
    double p = spectrum_.power[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!touched[i]) continue;
      const cplx old = spectrum_.modes[i * static_cast<std::size_t>(len) + static_cast<std::size_t>(j)];
      p += (std::norm(old + delta[i * static_cast<std::size_t>(len) + static_cast<std::size_t>(j)]) - std::norm(old)) * inv_n;
    }
    s += score_term(p, spectrum_.order);
  }
  return s;
}

void SearchState::apply(std::span<const Flip> flips) {
  if (flips.empty()) return;
  thread_local std::vector<cplx> delta;
  std::array<bool, 4> touched{};
  updated_modes(*this, flips, delta, touched);
  for (std::size_t k = 0; k < delta.size(); ++k) spectrum_.modes[k] += delta[k];
  for (const Flip& f : flips) array_.flip(f.segment, f.index);
  if (++moves_since_resync_ >= kResyncInterval) {
    resync();
    return;
  }
  refresh_power(spectrum_);
  score_ = gsh::score(spectrum_);
}

bool improves(double candidate, double current) {
  if (std::isinf(current)) return !std::isinf(candidate);
  return candidate < current - kImproveEpsilon;
}

double score_delta(double next, double current) {
  if (std::isinf(next) && std::isinf(current)) return 0.0;
  return next - current;
}

bool metropolis_accept(double delta, double temperature, double u01) {
  if (delta <= 0.0) return true;
  return u01 < std::exp(-delta / temperature);
}

double flip_score(const SearchState& state, int segment, int index) {
  const Flip f{segment, index};
  return state.score_after(std::span<const Flip>(&f, 1));
}

}  // namespace gsh

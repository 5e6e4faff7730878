#include "gsh/spectrum.hpp"

#include <cmath>
#include <stdexcept>

namespace gsh {

Spectrum spectrum(const GsArray& a) {
  Spectrum sp;
  sp.order = a.order();
  sp.length = a.segment_length();
  const auto len = static_cast<std::size_t>(sp.length);
  sp.modes.resize(4 * len);
  const DftPlan& plan = dft_plan(len);
  std::vector<cplx> in(len);
  for (int i = 0; i < kSegments; ++i) {
    auto seg = a.segment(i);
    for (std::size_t k = 0; k < len; ++k) in[k] = cplx(seg[k], 0.0);
    plan.forward(in, std::span<cplx>(sp.modes).subspan(i * len, len));
  }
  refresh_power(sp);
  return sp;
}

void refresh_power(Spectrum& sp) {
  const auto len = static_cast<std::size_t>(sp.length);
  sp.power.assign(len, 0.0);
  const double inv_n = 1.0 / sp.order;
  for (std::size_t j = 0; j < len; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) acc += std::norm(sp.modes[i * len + j]);
    sp.power[j] = acc * inv_n;
  }
}

double score_term(double power, int order) {
  // Round-off can push a vanishing mode slightly negative; anything
  // beyond that is a corrupted spectrum.
  if (!std::isfinite(power) || power * order < -1e-6) {
    throw std::domain_error("corrupted spectrum: power entry " + std::to_string(power));
  }
  if (power * order < kZeroPowerTolerance) return kInfiniteScore;
  const double u = power - 1.0;
  return u - std::log1p(u);
}

double score(std::span<const double> power, int order) {
  double s = 0.0;
  for (double p : power) s += score_term(p, order);
  return s;
}

double score(const Spectrum& sp) { return score(sp.power, sp.order); }

double score(const GsArray& a) { return score(spectrum(a)); }

}  // namespace gsh

#include "gsh/dft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace gsh {
namespace {

std::vector<std::size_t> factorize(std::size_t n) {
  std::vector<std::size_t> f;
  // Radix 4 first keeps the recursion shallow for powers of two.
  while (n % 4 == 0) {
    f.push_back(4);
    n /= 4;
  }
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      f.push_back(p);
      n /= p;
    }
  }
  if (n > 1) f.push_back(n);
  return f;
}

cplx unit_root(std::size_t e, std::size_t n) {
  // Reduce the angle exactly before calling sin/cos.
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(e % n) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace

DftPlan::DftPlan(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("DFT length must be positive");
  radices_ = factorize(n);
  roots_.resize(n);
  for (std::size_t e = 0; e < n; ++e) roots_[e] = unit_root(e, n);

  bool large_prime = false;
  for (auto p : radices_) large_prime = large_prime || p > kMaxDirectRadix;
  if (!large_prime) return;

  std::size_t m = 1;
  while (m < 2 * n - 1) m *= 2;
  chirp_plan_ = std::make_unique<DftPlan>(m);
  chirp_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // exp(i pi k^2 / n) = exp(2 pi i (k^2 mod 2n) / (2n)).
    chirp_[k] = unit_root((k * k) % (2 * n), 2 * n);
  }
  std::vector<cplx> b(m, cplx{0.0, 0.0});
  b[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp_[k]);
    b[m - k] = std::conj(chirp_[k]);
  }
  chirp_kernel_.resize(m);
  chirp_plan_->forward(b, chirp_kernel_);
}

void DftPlan::forward(std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("DFT size mismatch");
  if (chirp_plan_) {
    bluestein(in, out);
  } else {
    mixed_radix(in.data(), 1, out.data(), n_, 0);
  }
}

void DftPlan::inverse(std::span<const cplx> in, std::span<cplx> out) const {
  std::vector<cplx> tmp(in.begin(), in.end());
  for (auto& v : tmp) v = std::conj(v);
  forward(tmp, out);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : out) v = std::conj(v) * scale;
}

void DftPlan::mixed_radix(const cplx* in, std::size_t in_stride, cplx* out, std::size_t n,
                          std::size_t level) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = radices_[level];
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) {
    mixed_radix(in + r * in_stride, in_stride * p, out + r * m, m, level + 1);
  }
  // out[r*m + k] holds the length-m transform of the r-th decimated
  // subsequence; combine in place, slot k + q*m for q = 0..p-1.
  const std::size_t root_step = n_ / n;
  cplx gathered[kMaxDirectRadix + 1];
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < p; ++r) gathered[r] = out[r * m + k];
    for (std::size_t q = 0; q < p; ++q) {
      const std::size_t idx = k + q * m;
      cplx acc = gathered[0];
      for (std::size_t r = 1; r < p; ++r) {
        acc += gathered[r] * roots_[((r * idx) % n) * root_step];
      }
      out[idx] = acc;
    }
  }
}

void DftPlan::bluestein(std::span<const cplx> in, std::span<cplx> out) const {
  // jk = (j^2 + k^2 - (j-k)^2) / 2.
  const std::size_t m = chirp_plan_->size();
  std::vector<cplx> a(m, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < n_; ++k) a[k] = in[k] * chirp_[k];
  std::vector<cplx> fa(m);
  chirp_plan_->forward(a, fa);
  for (std::size_t j = 0; j < m; ++j) fa[j] *= chirp_kernel_[j];
  chirp_plan_->inverse(fa, a);
  for (std::size_t j = 0; j < n_; ++j) out[j] = a[j] * chirp_[j];
}

const DftPlan& dft_plan(std::size_t n) {
  thread_local std::size_t last_n = 0;
  thread_local const DftPlan* last = nullptr;
  if (last != nullptr && last_n == n) return *last;
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<DftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<DftPlan>(n);
  last_n = n;
  last = slot.get();
  return *slot;
}

}  // namespace gsh

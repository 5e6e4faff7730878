#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace gsh {

using cplx = std::complex<double>;

/// Exact-length discrete Fourier transform with the positive-exponent
/// convention X_j = sum_k x_k w^{jk}, w = exp(2 pi i / n).
///
/// Lengths whose prime factors are all small use recursive mixed-radix
/// Cooley-Tukey; a prime factor above kMaxDirectRadix switches the whole
/// transform to Bluestein's chirp-z algorithm over a power-of-two length.
class DftPlan {
 public:
  static constexpr std::size_t kMaxDirectRadix = 61;

  explicit DftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  bool uses_bluestein() const { return static_cast<bool>(chirp_plan_); }
  /// roots()[e] = w^e for e in [0, n).
  std::span<const cplx> roots() const { return roots_; }

  /// out may not alias in.
  void forward(std::span<const cplx> in, std::span<cplx> out) const;
  /// out_k = (1/n) sum_j X_j w^{-jk}.
  void inverse(std::span<const cplx> in, std::span<cplx> out) const;

 private:
  void mixed_radix(const cplx* in, std::size_t in_stride, cplx* out, std::size_t n,
                   std::size_t level) const;
  void bluestein(std::span<const cplx> in, std::span<cplx> out) const;

  std::size_t n_;
  std::vector<std::size_t> radices_;
  std::vector<cplx> roots_;  // roots_[e] = w^e
  // Bluestein state.
  std::unique_ptr<DftPlan> chirp_plan_;
  std::vector<cplx> chirp_;          // exp(pi i k^2 / n)
  std::vector<cplx> chirp_kernel_;   // forward DFT of conj chirp, zero padded
};

/// Process-wide cache of plans; safe to call from several threads.
const DftPlan& dft_plan(std::size_t n);

}  // namespace gsh

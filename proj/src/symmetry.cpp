#include "gsh/symmetry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace gsh {
namespace {

int mod(long long x, int m) {
  const long long r = x % m;
  return static_cast<int>(r < 0 ? r + m : r);
}

int inverse_unit(int u, int length) {
  for (int v = 1; v < length; ++v) {
    if (mod(static_cast<long long>(u) * v, length) == 1) return v;
  }
  throw std::invalid_argument("unit has no inverse");
}

bool is_permutation(const std::array<int, 4>& p) {
  std::array<bool, 4> seen{};
  for (int v : p) {
    if (v < 0 || v > 3 || seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = true;
  }
  return true;
}

// Byte encoding used for comparisons: +1 -> 0, -1 -> 1.
using Bits = std::vector<std::uint8_t>;

// Booth's algorithm: start index of the lexicographically least rotation.
std::size_t least_rotation(const Bits& s) {
  const std::size_t n = s.size();
  std::vector<long> f(2 * n, -1);
  std::size_t k = 0;
  for (std::size_t j = 1; j < 2 * n; ++j) {
    const std::uint8_t sj = s[j % n];
    long i = f[j - k - 1];
    while (i != -1 && sj != s[(k + static_cast<std::size_t>(i) + 1) % n]) {
      if (sj < s[(k + static_cast<std::size_t>(i) + 1) % n]) k = j - static_cast<std::size_t>(i) - 1;
      i = f[static_cast<std::size_t>(i)];
    }
    if (i == -1 && sj != s[k % n]) {
      if (sj < s[k % n]) k = j;
      f[j - k] = -1;
    } else {
      f[j - k] = i + 1;
    }
  }
  return k % n;
}

Bits rotated(const Bits& s, std::size_t start) {
  Bits out(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) out[j] = s[(start + j) % s.size()];
  return out;
}

// Least image of one segment under rotation, reversal and negation.
Bits canonical_segment(const Bits& x) {
  const std::size_t n = x.size();
  Bits neg(n), rev(n), negrev(n);
  for (std::size_t j = 0; j < n; ++j) {
    neg[j] = static_cast<std::uint8_t>(1 - x[j]);
    rev[j] = x[(n - j) % n];
    negrev[j] = static_cast<std::uint8_t>(1 - rev[j]);
  }
  Bits best = rotated(x, least_rotation(x));
  for (const Bits* cand : {&neg, &rev, &negrev}) {
    Bits r = rotated(*cand, least_rotation(*cand));
    if (r < best) best = std::move(r);
  }
  return best;
}

}  // namespace

std::vector<int> units(int length) {
  if (length < 1) throw std::invalid_argument("segment length must be positive");
  if (length == 1) return {1};
  std::vector<int> out;
  for (int u = 1; u < length; ++u) {
    if (std::gcd(u, length) == 1) out.push_back(u);
  }
  return out;
}

SymmetryElement SymmetryElement::identity(int length) {
  SymmetryElement g;
  g.length_ = length;
  return g;
}

SymmetryElement::SymmetryElement(int length, int unit, std::array<int, 4> shift,
                                 std::array<bool, 4> reverse, std::array<bool, 4> negate,
                                 std::array<int, 4> perm)
    : length_(length), reverse_(reverse), negate_(negate), perm_(perm) {
  if (length < 1) throw std::invalid_argument("segment length must be positive");
  if (std::gcd(mod(unit, length), length) != 1) {
    throw std::invalid_argument("unit " + std::to_string(unit) + " is not invertible mod " +
                                std::to_string(length));
  }
  if (!is_permutation(perm)) throw std::invalid_argument("perm is not a permutation of {0,1,2,3}");
  unit_ = length == 1 ? 1 : mod(unit, length);
  for (std::size_t i = 0; i < 4; ++i) shift_[i] = mod(shift[i], length);
}

GsArray SymmetryElement::apply(const GsArray& a) const {
  if (a.segment_length() != length_) {
    throw std::invalid_argument("symmetry element length does not match array");
  }
  std::vector<std::int8_t> out(a.entries().size());
  for (std::size_t i = 0; i < 4; ++i) {
    const int e = reverse_[i] ? -1 : 1;
    const std::int8_t sign = negate_[i] ? -1 : 1;
    const auto seg = a.segment(static_cast<int>(i));
    const std::size_t base = static_cast<std::size_t>(perm_[i]) * static_cast<std::size_t>(length_);
    for (int j = 0; j < length_; ++j) {
      const int dst = mod(shift_[i] + static_cast<long long>(e) * unit_ * j, length_);
      out[base + static_cast<std::size_t>(dst)] = static_cast<std::int8_t>(sign * seg[static_cast<std::size_t>(j)]);
    }
  }
  return GsArray(a.order(), std::move(out));
}

SymmetryElement SymmetryElement::after(const SymmetryElement& first) const {
  if (first.length_ != length_) throw std::invalid_argument("composing elements of different lengths");
  SymmetryElement g;
  g.length_ = length_;
  g.unit_ = length_ == 1 ? 1 : mod(static_cast<long long>(unit_) * first.unit_, length_);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto mid = static_cast<std::size_t>(first.perm_[i]);
    const int e2 = reverse_[mid] ? -1 : 1;
    g.perm_[i] = perm_[mid];
    g.reverse_[i] = reverse_[mid] != first.reverse_[i];
    g.negate_[i] = negate_[mid] != first.negate_[i];
    g.shift_[i] = mod(shift_[mid] + static_cast<long long>(e2) * unit_ * first.shift_[i], length_);
  }
  return g;
}

SymmetryElement SymmetryElement::inverse() const {
  SymmetryElement g;
  g.length_ = length_;
  const int uinv = length_ == 1 ? 1 : inverse_unit(unit_, length_);
  g.unit_ = uinv;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto k = static_cast<std::size_t>(perm_[i]);
    const int e = reverse_[i] ? -1 : 1;
    g.perm_[k] = static_cast<int>(i);
    g.reverse_[k] = reverse_[i];
    g.negate_[k] = negate_[i];
    g.shift_[k] = mod(-static_cast<long long>(e) * uinv * shift_[i], length_);
  }
  return g;
}

SymmetryElement random_element(int length, Rng& rng) {
  const auto us = units(length);
  const int unit = us[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(us.size())))];
  std::array<int, 4> shift{}, perm{0, 1, 2, 3};
  std::array<bool, 4> reverse{}, negate{};
  for (std::size_t i = 0; i < 4; ++i) {
    shift[i] = uniform_index(rng, length);
    reverse[i] = uniform_index(rng, 2) == 1;
    negate[i] = uniform_index(rng, 2) == 1;
  }
  // Fisher-Yates gives a uniform permutation.
  for (int i = 3; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(uniform_index(rng, i + 1))]);
  return SymmetryElement(length, unit, shift, reverse, negate, perm);
}

GsArray canonicalize(const GsArray& a) {
  const int len = a.segment_length();
  const auto ulen = static_cast<std::size_t>(len);
  Bits best;
  Bits relabelled(ulen);
  for (int u : units(len)) {
    std::array<Bits, 4> segs;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto seg = a.segment(static_cast<int>(i));
      for (int j = 0; j < len; ++j) {
        relabelled[static_cast<std::size_t>(mod(static_cast<long long>(u) * j, len))] =
            seg[static_cast<std::size_t>(j)] > 0 ? 0 : 1;
      }
      segs[i] = canonical_segment(relabelled);
    }
    std::sort(segs.begin(), segs.end());
    Bits cand;
    cand.reserve(4 * ulen);
    for (const auto& s : segs) cand.insert(cand.end(), s.begin(), s.end());
    if (best.empty() || cand < best) best = std::move(cand);
  }
  std::vector<std::int8_t> entries(best.size());
  for (std::size_t i = 0; i < best.size(); ++i) entries[i] = best[i] ? -1 : 1;
  return GsArray(a.order(), std::move(entries));
}

std::vector<GsArray> dedup(std::span<const GsArray> population) {
  std::vector<GsArray> canon(population.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < population.size(); ++i) canon[i] = canonicalize(population[i]);

  std::vector<GsArray> out;
  std::unordered_set<std::string> seen;
  for (auto& c : canon) {
    if (seen.insert(c.key()).second) out.push_back(std::move(c));
  }
  return out;
}

namespace {

// Number of (e, s) with s + e*u*j = j (mod n') for every j.
std::int64_t trivial_dihedral_count(int u, int len) {
  std::int64_t count = 0;
  for (int e : {1, -1}) {
    for (int s = 0; s < len; ++s) {
      bool ok = true;
      for (int j = 0; j < len && ok; ++j) ok = mod(s + static_cast<long long>(e) * u * j, len) == j;
      count += ok ? 1 : 0;
    }
  }
  return count;
}

std::int64_t kernel_order(int len) {
  std::int64_t k = 0;
  for (int u : units(len)) {
    const std::int64_t c = trivial_dihedral_count(u, len);
    k += c * c * c * c;
  }
  return k;
}

}  // namespace

std::int64_t effective_group_order(int length) {
  const auto phi = static_cast<std::int64_t>(units(length).size());
  const std::int64_t per_segment = 4LL * length;
  const std::int64_t formal = phi * 24 * per_segment * per_segment * per_segment * per_segment;
  return formal / kernel_order(length);
}

std::int64_t stabilizer_order(const GsArray& a) {
  const int len = a.segment_length();
  // matches[u][i][t]: number of (e, s, sign) sending segment i, relabelled
  // by u, onto segment t.
  std::int64_t formal = 0;
  for (int u : units(len)) {
    std::int64_t matches[4][4] = {};
    for (int i = 0; i < 4; ++i) {
      const auto src = a.segment(i);
      for (int t = 0; t < 4; ++t) {
        const auto dst = a.segment(t);
        for (int e : {1, -1}) {
          for (int s = 0; s < len; ++s) {
            bool same = true, opposite = true;
            for (int j = 0; j < len && (same || opposite); ++j) {
              const auto want = dst[static_cast<std::size_t>(mod(s + static_cast<long long>(e) * u * j, len))];
              const auto have = src[static_cast<std::size_t>(j)];
              same = same && want == have;
              opposite = opposite && want == -have;
            }
            matches[i][t] += (same ? 1 : 0) + (opposite ? 1 : 0);
          }
        }
      }
    }
    std::array<int, 4> perm{0, 1, 2, 3};
    do {
      std::int64_t prod = 1;
      for (int i = 0; i < 4; ++i) prod *= matches[i][perm[static_cast<std::size_t>(i)]];
      formal += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return formal / kernel_order(len);
}

}  // namespace gsh

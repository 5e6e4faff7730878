#include "gsh/enumerate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "gsh/matrix.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"

namespace gsh {

namespace {

// Per-segment data for all 2^n' sign patterns; bit k set means entry +1.
struct SegmentTable {
  int length = 0;
  int lags = 0;   // autocorrelation lags 1..lags (the rest follow by symmetry)
  int freqs = 0;  // frequencies 1..freqs
  std::vector<int> sum;
  std::vector<int> paf;       // [mask * lags + (lag - 1)]
  std::vector<double> power;  // [mask * freqs + (j - 1)], |lambda_j|^2

  explicit SegmentTable(int len) : length(len), lags(len / 2), freqs(len / 2) {
    const int count = 1 << len;
    sum.resize(static_cast<std::size_t>(count));
    paf.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(lags));
    power.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(freqs));
    std::vector<int> x(static_cast<std::size_t>(len));
    for (int m = 0; m < count; ++m) {
      int s = 0;
      for (int k = 0; k < len; ++k) {
        x[static_cast<std::size_t>(k)] = (m >> k & 1) ? 1 : -1;
        s += x[static_cast<std::size_t>(k)];
      }
      sum[static_cast<std::size_t>(m)] = s;
      for (int t = 1; t <= lags; ++t) {
        int acc = 0;
        for (int k = 0; k < len; ++k) acc += x[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>((k + t) % len)];
        paf[static_cast<std::size_t>(m * lags + t - 1)] = acc;
      }
      for (int j = 1; j <= freqs; ++j) {
        std::complex<double> lambda = 0;
        for (int k = 0; k < len; ++k) {
          lambda += static_cast<double>(x[static_cast<std::size_t>(k)]) *
                    std::polar(1.0, 2.0 * std::numbers::pi * j * k / len);
        }
        power[static_cast<std::size_t>(m * freqs + j - 1)] = std::norm(lambda);
      }
    }
  }

  // Autocorrelation values lie in [-len, len]; 5 bits each for len <= 9.
  std::uint64_t key(const int* values) const {
    std::uint64_t k = 0;
    for (int t = 0; t < lags; ++t) k = k << 5 | static_cast<std::uint64_t>(values[t] + length);
    return k;
  }
};

int rotate_mask(int m, int r, int len) {
  const int full = (1 << len) - 1;
  return ((m << r) | (m >> (len - r))) & full;
}

int reverse_mask(int m, int len) {
  int out = 0;
  for (int k = 0; k < len; ++k) {
    if (m >> k & 1) out |= 1 << (len - 1 - k);
  }
  return out;
}

// Representatives under rotation, reversal and negation with class sizes.
std::vector<std::pair<int, std::int64_t>> segment_classes(int len) {
  const int count = 1 << len, full = count - 1;
  std::vector<std::pair<int, std::int64_t>> out;
  for (int m = 0; m < count; ++m) {
    std::set<int> images;
    for (int base : {m, reverse_mask(m, len)}) {
      for (int r = 0; r < len; ++r) {
        const int rot = len == 0 ? base : rotate_mask(base, r, len);
        images.insert(rot);
        images.insert(rot ^ full);
      }
    }
    if (*images.begin() == m) out.emplace_back(m, static_cast<std::int64_t>(images.size()));
  }
  return out;
}

GsArray assemble(int n, const std::array<int, 4>& masks, const std::array<int, 4>& order) {
  const int len = n / 4;
  std::vector<std::int8_t> e(static_cast<std::size_t>(n));
  for (int t = 0; t < 4; ++t) {
    const int slot = order[static_cast<std::size_t>(t)];
    for (int k = 0; k < len; ++k) {
      e[static_cast<std::size_t>(slot * len + k)] = (masks[static_cast<std::size_t>(t)] >> k & 1) ? 1 : -1;
    }
  }
  return GsArray(n, std::move(e));
}

struct Partial {
  std::int64_t count = 0, candidates = 0, disagreements = 0;
  std::vector<std::string> keys;
  std::vector<GsArray> arrays;
};

}  // namespace

bool exact_check(const GsArray& a) { return verify_hadamard(build_matrix(a)); }

bool spectral_check(const GsArray& a) {
  const Spectrum sp = spectrum(a);
  const double n = a.order();
  for (double p : sp.power) {
    if (!(std::abs(n * p - n) < 1e-6)) return false;
  }
  return true;
}

EnumerateResult enumerate_gs(int n, const EnumerateOptions& options) {
  if (n < 4 || n % 4 != 0) throw std::invalid_argument("n must be a positive multiple of 4, got " + std::to_string(n));
  if (n > kMaxEnumerateOrder) {
    throw std::invalid_argument("enumeration supports n <= " + std::to_string(kMaxEnumerateOrder) + ", got " +
                                std::to_string(n));
  }
  {
    auto sorted = options.segment_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 4>{0, 1, 2, 3}) throw std::invalid_argument("segment_order must be a permutation");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const int len = n / 4, count = 1 << len;
  const SegmentTable table(len);
  const int lags = table.lags, freqs = table.freqs;
  const int min_rest = len % 2 ? 1 : 0;  // smallest k^2 a later segment can have
  const double budget = n * (1.0 + 1e-9);

  std::unordered_map<std::uint64_t, std::vector<int>> by_paf;
  for (int m = 0; m < count; ++m) by_paf[table.key(&table.paf[static_cast<std::size_t>(m * lags)])].push_back(m);

  std::vector<std::pair<int, std::int64_t>> firsts;
  if (options.keep_arrays) {
    for (int m = 0; m < count; ++m) firsts.emplace_back(m, 1);
  } else {
    firsts = segment_classes(len);
  }

  auto fits = [&](const double* partial) {
    for (int j = 0; j < freqs; ++j) {
      if (partial[j] > budget) return false;
    }
    return true;
  };

  std::vector<Partial> parts(firsts.size());
  const auto nfirst = static_cast<std::int64_t>(firsts.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t f = 0; f < nfirst; ++f) {
    const auto [m1, weight] = firsts[static_cast<std::size_t>(f)];
    Partial& out = parts[static_cast<std::size_t>(f)];
    std::vector<double> p1(static_cast<std::size_t>(freqs)), p2(p1), p3(p1);
    std::vector<int> a2(static_cast<std::size_t>(lags)), need(a2);
    auto power = [&](int m) { return &table.power[static_cast<std::size_t>(m * freqs)]; };
    auto paf = [&](int m) { return &table.paf[static_cast<std::size_t>(m * lags)]; };

    const int k1 = table.sum[static_cast<std::size_t>(m1)] * table.sum[static_cast<std::size_t>(m1)];
    if (k1 + 3 * min_rest > n) continue;
    std::copy(power(m1), power(m1) + freqs, p1.begin());
    if (!fits(p1.data())) continue;
    for (int m2 = 0; m2 < count; ++m2) {
      const int k2 = k1 + table.sum[static_cast<std::size_t>(m2)] * table.sum[static_cast<std::size_t>(m2)];
      if (k2 + 2 * min_rest > n) continue;
      for (int j = 0; j < freqs; ++j) p2[static_cast<std::size_t>(j)] = p1[static_cast<std::size_t>(j)] + power(m2)[j];
      if (!fits(p2.data())) continue;
      for (int t = 0; t < lags; ++t) a2[static_cast<std::size_t>(t)] = paf(m1)[t] + paf(m2)[t];
      for (int m3 = 0; m3 < count; ++m3) {
        const int k3 = k2 + table.sum[static_cast<std::size_t>(m3)] * table.sum[static_cast<std::size_t>(m3)];
        if (k3 + min_rest > n) continue;
        for (int j = 0; j < freqs; ++j) p3[static_cast<std::size_t>(j)] = p2[static_cast<std::size_t>(j)] + power(m3)[j];
        if (!fits(p3.data())) continue;
        bool reachable = true;
        for (int t = 0; t < lags; ++t) {
          need[static_cast<std::size_t>(t)] = -(a2[static_cast<std::size_t>(t)] + paf(m3)[t]);
          reachable = reachable && std::abs(need[static_cast<std::size_t>(t)]) <= len;
        }
        if (!reachable) continue;
        const auto it = by_paf.find(table.key(need.data()));
        if (it == by_paf.end()) continue;
        for (int m4 : it->second) {
          const int k4 = k3 + table.sum[static_cast<std::size_t>(m4)] * table.sum[static_cast<std::size_t>(m4)];
          if (k4 != n) continue;
          const GsArray a = assemble(n, {m1, m2, m3, m4}, options.segment_order);
          const bool exact = exact_check(a), spectral = spectral_check(a);
          ++out.candidates;
          if (exact != spectral) ++out.disagreements;
          if (!exact) continue;
          out.count += weight;
          if (options.orbit_count) out.keys.push_back(canonicalize(a).key());
          if (options.keep_arrays) out.arrays.push_back(a);
        }
      }
    }
  }

  EnumerateResult r;
  r.n = n;
  std::set<std::string> orbits;
  for (Partial& p : parts) {
    r.count += p.count;
    r.candidates += p.candidates;
    r.disagreements += p.disagreements;
    orbits.insert(p.keys.begin(), p.keys.end());
    std::move(p.arrays.begin(), p.arrays.end(), std::back_inserter(r.arrays));
  }
  if (options.orbit_count) r.orbit_count = static_cast<std::int64_t>(orbits.size());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

BruteForceResult brute_force_count(int n) {
  check_order(n);
  if (n > kMaxBruteForceOrder) {
    throw std::invalid_argument("brute force supports n <= " + std::to_string(kMaxBruteForceOrder));
  }
  const std::int64_t total = std::int64_t{1} << n;
  std::int64_t exact = 0, spectral = 0, disagreements = 0;
#pragma omp parallel for schedule(static) reduction(+ : exact, spectral, disagreements)
  for (std::int64_t m = 0; m < total; ++m) {
    std::vector<std::int8_t> e(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) e[static_cast<std::size_t>(j)] = (m >> j & 1) ? 1 : -1;
    const GsArray a(n, std::move(e));
    const bool x = exact_check(a), s = spectral_check(a);
    exact += x;
    spectral += s;
    disagreements += x != s;
  }
  return {exact, spectral, disagreements};
}

double growth_report(std::span<const std::pair<int, double>> counts) {
  if (counts.size() < 4) throw std::invalid_argument("growth_report needs at least four orders");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!(counts[i].second > 0)) throw std::invalid_argument("growth_report needs positive counts");
    if (i > 0 && counts[i].first != counts[i - 1].first + 4) {
      throw std::invalid_argument("growth_report needs consecutive orders n, n+4, ...");
    }
  }
  double mx = 0, my = 0;
  for (const auto& [n, c] : counts) {
    mx += n;
    my += std::log(c);
  }
  mx /= static_cast<double>(counts.size());
  my /= static_cast<double>(counts.size());
  double sxy = 0, sxx = 0;
  for (const auto& [n, c] : counts) {
    sxy += (n - mx) * (std::log(c) - my);
    sxx += (n - mx) * (n - mx);
  }
  return std::exp(sxy / sxx);
}

std::string enumeration_csv(std::span<const EnumerateResult> results) {
  std::string out = "n,count,orbit_count,seconds\n";
  for (const EnumerateResult& r : results) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
    out += std::to_string(r.n) + "," + std::to_string(r.count) + "," + std::to_string(r.orbit_count) + "," + secs + "\n";
  }
  return out;
}

}  // namespace gsh

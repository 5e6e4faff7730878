#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "gsh/matrix.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"
#include "gsh/text_format.hpp"
#include "support/oracles.hpp"

using namespace gsh;

namespace {

// Every formal element (unit, shifts, reversal and negation bits, perm).
std::vector<SymmetryElement> all_elements(int len) {
  std::vector<SymmetryElement> out;
  std::array<int, 4> perm{0, 1, 2, 3};
  const int per_segment = 4 * len;
  do {
    for (int u : units(len)) {
      for (int code = 0; code < per_segment * per_segment * per_segment * per_segment; ++code) {
        std::array<int, 4> shift{};
        std::array<bool, 4> rev{}, neg{};
        int c = code;
        for (std::size_t i = 0; i < 4; ++i) {
          const int x = c % per_segment;
          c /= per_segment;
          shift[i] = x % len;
          rev[i] = (x / len) % 2 == 1;
          neg[i] = (x / len) / 2 == 1;
        }
        out.emplace_back(len, u, shift, rev, neg, perm);
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace

TEST_CASE("units") {
  CHECK(units(1) == std::vector<int>{1});
  CHECK(units(5) == std::vector<int>{1, 2, 3, 4});
  CHECK(units(9) == std::vector<int>{1, 2, 4, 5, 7, 8});
  CHECK(units(35).size() == 24);
}

TEST_CASE("apply conventions") {
  const GsArray a = parse_arrays("+--\n+-+\n---\n++-\n").at(0);
  CHECK(SymmetryElement::identity(3).apply(a) == a);

  const SymmetryElement shift1(3, 1, {1, 0, 0, 0}, {}, {}, {0, 1, 2, 3});
  // (x0, x1, x2) -> (x2, x0, x1)
  CHECK(shift1.apply(a).key().substr(0, 3) == "-+-");

  const SymmetryElement swap01(3, 1, {}, {}, {}, {1, 0, 2, 3});
  CHECK(swap01.apply(a).key() == "+-++-----++-");
  CHECK_THROWS_AS(SymmetryElement(6, 2, {}, {}, {}, {0, 1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(SymmetryElement(5, 1, {}, {}, {}, {0, 0, 2, 3}), std::invalid_argument);
}

TEST_CASE("group action: composition, inverse, identity") {
  Rng rng(1);
  for (int len : {1, 2, 3, 5, 7, 9, 35}) {
    for (int t = 0; t < 1500; ++t) {
      const GsArray a = oracle::random_array(4 * len, rng);
      const auto g1 = random_element(len, rng);
      const auto g2 = random_element(len, rng);
      const auto g3 = random_element(len, rng);
      CHECK(g2.apply(g1.apply(a)) == (g2 * g1).apply(a));
      CHECK(g1.inverse().apply(g1.apply(a)) == a);
      CHECK((g1 * g1.inverse()).apply(a) == a);
      CHECK(((g3 * g2) * g1).apply(a) == (g3 * (g2 * g1)).apply(a));
    }
  }
}

TEST_CASE("random_element distribution") {
  SUBCASE("n'=1 is uniform over the 384 effective elements") {
    Rng rng(7);
    std::map<std::string, int> counts;
    // At n'=1 an element acts through its negations and permutation only.
    const int draws = 38400;
    for (int t = 0; t < draws; ++t) {
      const auto g = random_element(1, rng);
      std::string code;
      for (int i = 0; i < 4; ++i) code += std::to_string(g.perm()[static_cast<std::size_t>(i)]) + (g.negate()[static_cast<std::size_t>(i)] ? "-" : "+");
      ++counts[code];
    }
    CHECK(counts.size() == 384);
    const double mean = draws / 384.0;
    const double sigma = std::sqrt(mean * (1.0 - 1.0 / 384.0));
    for (const auto& [code, c] : counts) CHECK(std::abs(c - mean) < 5.0 * sigma);
    CHECK(effective_group_order(1) == 384);
  }
  SUBCASE("n'=5 unit is uniform over (Z/5)^x") {
    Rng rng(8);
    std::map<int, int> counts;
    const int draws = 40000;
    for (int t = 0; t < draws; ++t) ++counts[random_element(5, rng).unit()];
    CHECK(counts.size() == 4);
    for (int u : {1, 2, 3, 4}) CHECK(std::abs(counts[u] - draws / 4.0) < 5.0 * std::sqrt(draws * 0.25 * 0.75));
  }
}

TEST_CASE("invariance of score and Hadamard property") {
  Rng rng(2);
  for (int len : {3, 5, 7, 35}) {
    for (int t = 0; t < 500; ++t) {
      const GsArray a = oracle::random_array(4 * len, rng);
      const GsArray b = random_element(len, rng).apply(a);
      const double sa = score(a), sb = score(b);
      if (std::isinf(sa)) {
        CHECK(std::isinf(sb));
      } else {
        CHECK(std::abs(sa - sb) <= 1e-10);
      }
    }
  }
  std::ifstream in(GSH_TEST_DATA_DIR "/large_orders.txt");
  for (const auto& h : read_arrays(in)) {
    for (int t = 0; t < 5; ++t) CHECK(verify_hadamard(build_matrix(random_element(h.segment_length(), rng).apply(h))));
  }
}

TEST_CASE("canonical form") {
  SUBCASE("any n=4 array canonicalizes to all +1") {
    for (std::uint64_t bits = 0; bits < 16; ++bits) CHECK(canonicalize(oracle::array_from_bits(4, bits)) == GsArray(4));
  }
  SUBCASE("orbit constancy and idempotence") {
    Rng rng(4);
    for (int len : {3, 5, 7, 35}) {
      for (int t = 0; t < 300; ++t) {
        const GsArray a = oracle::random_array(4 * len, rng);
        const GsArray c = canonicalize(a);
        CHECK(canonicalize(random_element(len, rng).apply(a)) == c);
        CHECK(canonicalize(c) == c);
        CHECK(c <= a);
      }
    }
  }
  SUBCASE("orbit count matches brute-force orbit partition for n' <= 3") {
    for (int len : {1, 2, 3}) {
      const int n = 4 * len;
      const auto group = len <= 2 ? all_elements(len) : std::vector<SymmetryElement>{};
      std::vector<int> parent(std::size_t{1} << n);
      std::iota(parent.begin(), parent.end(), 0);
      std::function<int(int)> find = [&](int x) { return parent[static_cast<std::size_t>(x)] == x ? x : parent[static_cast<std::size_t>(x)] = find(parent[static_cast<std::size_t>(x)]); };
      auto code = [&](const GsArray& a) {
        int c = 0;
        for (int k = 0; k < n; ++k) c |= (a.entries()[static_cast<std::size_t>(k)] < 0 ? 1 : 0) << k;
        return c;
      };
      std::set<std::string> canon;
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        const GsArray a = oracle::array_from_bits(n, bits);
        canon.insert(canonicalize(a).key());
        // Generators suffice for the partition, but all elements is cheap here.
        if (len <= 2) {
          for (const auto& g : group) parent[static_cast<std::size_t>(find(code(g.apply(a))))] = find(static_cast<int>(bits));
        }
      }
      if (len == 3) {
        // 12^4*24*2 elements x 4096 arrays is too slow; use generators.
        std::vector<SymmetryElement> gens{
            SymmetryElement(3, 1, {1, 0, 0, 0}, {}, {}, {0, 1, 2, 3}),
            SymmetryElement(3, 1, {}, {true, false, false, false}, {}, {0, 1, 2, 3}),
            SymmetryElement(3, 1, {}, {}, {true, false, false, false}, {0, 1, 2, 3}),
            SymmetryElement(3, 1, {}, {}, {}, {1, 0, 2, 3}),
            SymmetryElement(3, 1, {}, {}, {}, {1, 2, 3, 0}),
            SymmetryElement(3, 2, {}, {}, {}, {0, 1, 2, 3}),
        };
        for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
          const GsArray a = oracle::array_from_bits(n, bits);
          for (const auto& g : gens) parent[static_cast<std::size_t>(find(code(g.apply(a))))] = find(static_cast<int>(bits));
        }
      }
      std::set<int> roots;
      for (int x = 0; x < (1 << n); ++x) roots.insert(find(x));
      CHECK(canon.size() == roots.size());
    }
  }
}

TEST_CASE("dedup") {
  std::vector<GsArray> all4;
  for (std::uint64_t bits = 0; bits < 16; ++bits) all4.push_back(oracle::array_from_bits(4, bits));
  CHECK(dedup(all4) == std::vector<GsArray>{GsArray(4)});

  Rng rng(6);
  const GsArray a = oracle::random_array(28, rng);
  const std::vector<GsArray> pair{a, random_element(7, rng).apply(a)};
  const auto d = dedup(pair);
  REQUIRE(d.size() == 1);
  CHECK(d[0] == canonicalize(a));

  std::vector<GsArray> distinct;
  std::set<std::string> keys;
  while (distinct.size() < 50) {
    const GsArray x = oracle::random_array(28, rng);
    if (keys.insert(canonicalize(x).key()).second) distinct.push_back(x);
  }
  const auto kept = dedup(distinct);
  REQUIRE(kept.size() == distinct.size());
  for (std::size_t i = 0; i < kept.size(); ++i) CHECK(kept[i] == canonicalize(distinct[i]));
}

TEST_CASE("stabilizer order") {
  CHECK(stabilizer_order(GsArray(4)) == 24);
  // Exhaustive check over the formal group for small n'.
  Rng rng(12);
  for (int len : {1, 2, 3}) {
    const auto group = all_elements(len);
    std::int64_t kernel = 0;
    for (int t = 0; t < 6; ++t) {
      GsArray a = t == 0 ? GsArray(4 * len) : oracle::random_array(4 * len, rng);
      std::int64_t fixed = 0;
      for (const auto& g : group) fixed += g.apply(a) == a ? 1 : 0;
      // Elements acting trivially on everything.
      if (t == 0) {
        kernel = 0;
        for (const auto& g : group) {
          bool trivial = true;
          for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << (4 * len)) && trivial; ++bits) {
            const GsArray x = oracle::array_from_bits(4 * len, bits);
            trivial = g.apply(x) == x;
          }
          kernel += trivial ? 1 : 0;
        }
      }
      CHECK(stabilizer_order(a) == fixed / kernel);
    }
    CHECK(effective_group_order(len) == static_cast<std::int64_t>(group.size()) / kernel);
  }
  // Four identical symmetric segments are fixed by all of S4.
  const GsArray sym = parse_arrays("+-+--+-\n+-+--+-\n+-+--+-\n+-+--+-\n").at(0);
  CHECK(stabilizer_order(sym) % 24 == 0);
  // A generic large array has trivial stabilizer.
  std::ifstream in(GSH_TEST_DATA_DIR "/large_orders.txt");
  const auto samples = read_arrays(in);
  CHECK(stabilizer_order(samples.at(0)) == 1);
}

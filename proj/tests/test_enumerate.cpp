#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "gsh/enumerate.hpp"
#include "gsh/segment_sums.hpp"
#include "gsh/symmetry.hpp"

using namespace gsh;

namespace {

// Goldens from our own enumeration; each was confirmed by the brute-force
// count (both checkers, n <= 20) and by enumerating in other segment orders.
const std::vector<std::pair<int, std::int64_t>> kCounts = {
    {4, 16}, {8, 96}, {12, 1728}, {16, 4864}, {20, 120000}, {24, 622080}};

}  // namespace

TEST_CASE("small orders") {
  CHECK(enumerate_gs(4).count == 16);
  // Two of the four segments have |lambda_0| = 2: C(4,2) * 2^2 * 2^2.
  CHECK(enumerate_gs(8).count == 6 * 4 * 4);
  const EnumerateResult r = enumerate_gs(4);
  CHECK(r.orbit_count == 1);
}

TEST_CASE("pruned enumeration equals brute force") {
  for (int n : {4, 8, 12, 16}) {
    CAPTURE(n);
    const BruteForceResult b = brute_force_count(n);
    CHECK(b.disagreements == 0);
    CHECK(b.exact == b.spectral);
    CHECK(enumerate_gs(n).count == b.exact);
  }
}

TEST_CASE("golden counts with both checkers agreeing") {
  for (const auto& [n, count] : kCounts) {
    CAPTURE(n);
    const EnumerateResult r = enumerate_gs(n);
    CHECK(r.count == count);
    CHECK(r.disagreements == 0);
    CHECK(r.candidates > 0);
  }
}

TEST_CASE("count does not depend on the segment order") {
  for (const std::array<int, 4>& order : {std::array<int, 4>{3, 2, 1, 0}, std::array<int, 4>{1, 3, 0, 2}}) {
    EnumerateOptions o;
    o.segment_order = order;
    CHECK(enumerate_gs(16, o).count == 4864);
    CHECK(enumerate_gs(20, o).count == 120000);
  }
  EnumerateOptions bad;
  bad.segment_order = {0, 0, 1, 2};
  CHECK_THROWS_AS(enumerate_gs(8, bad), std::invalid_argument);
}

TEST_CASE("enumerated arrays") {
  EnumerateOptions o;
  o.keep_arrays = true;
  const EnumerateResult r = enumerate_gs(16, o);
  REQUIRE(r.arrays.size() == 4864);
  std::set<GsArray> distinct(r.arrays.begin(), r.arrays.end());
  CHECK(distinct.size() == r.arrays.size());
  std::set<std::string> orbits;
  for (const GsArray& a : r.arrays) {
    CHECK(sum_of_squares(segment_sums(a)) == 16);
    CHECK(exact_check(a));
    orbits.insert(canonicalize(a).key());
  }
  CHECK(static_cast<std::int64_t>(orbits.size()) == r.orbit_count);
  CHECK(r.orbit_count == enumerate_gs(16).orbit_count);
}

TEST_CASE("enumeration bounds") {
  CHECK_THROWS_AS(enumerate_gs(10), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_gs(0), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_gs(40), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_count(24), std::invalid_argument);
}

TEST_CASE("growth_report") {
  std::vector<std::pair<int, double>> counts;
  for (const auto& [n, c] : kCounts) counts.emplace_back(n, static_cast<double>(c));
  const double base = growth_report(counts);
  CHECK(base >= 1.3);
  CHECK(base <= 1.9);

  const std::vector<std::pair<int, double>> flat = {{4, 5}, {8, 5}, {12, 5}, {16, 5}};
  CHECK(growth_report(flat) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<std::pair<int, double>> doubling = {{4, 1}, {8, 2}, {12, 4}, {16, 8}, {20, 16}};
  CHECK(growth_report(doubling) == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-12));

  const std::vector<std::pair<int, double>> short_run = {{4, 1}, {8, 2}, {12, 4}};
  CHECK_THROWS_AS(growth_report(short_run), std::invalid_argument);
  const std::vector<std::pair<int, double>> gap = {{4, 1}, {8, 2}, {16, 4}, {20, 8}};
  CHECK_THROWS_AS(growth_report(gap), std::invalid_argument);
}

TEST_CASE("enumeration csv") {
  const std::vector<EnumerateResult> rs = {enumerate_gs(4), enumerate_gs(8)};
  const std::string csv = enumeration_csv(rs);
  CHECK(csv.rfind("n,count,orbit_count,seconds\n4,16,1,", 0) == 0);
  CHECK(csv.find("\n8,96,1,") != std::string::npos);
}

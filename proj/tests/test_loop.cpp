#include <doctest.h>

#include <omp.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gsh/loop.hpp"
#include "gsh/matrix.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"
#include "gsh/text_format.hpp"

using namespace gsh;

namespace {

RunConfig tiny(int n, int sample_size, int generations, std::uint64_t seed = 7) {
  RunConfig c;
  c.n = n;
  c.sample_size = sample_size;
  c.generations = generations;
  c.seed = seed;
  c.n_layer = 1;
  c.n_embd = 16;
  c.n_head = 2;
  c.training_steps = 30;
  c.batch_size = 16;
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gsh-loop-" + std::to_string(getpid()) + "-" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const RunConfig& c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

void check_state_invariants(const RunState& s) {
  std::set<std::string> keys;
  for (const GsArray& a : s.archive) {
    CHECK(verify_hadamard(build_matrix(a)));
    CHECK(canonicalize(a) == a);
    CHECK(keys.insert(a.key()).second);
  }
  std::set<std::string> pop;
  REQUIRE(s.population.size() == s.scores.size());
  for (std::size_t i = 0; i < s.population.size(); ++i) {
    CHECK(canonicalize(s.population[i]) == s.population[i]);
    CHECK(pop.insert(s.population[i].key()).second);
    CHECK(std::abs(s.scores[i] - score(s.population[i])) <= 1e-9);
    if (i > 0) CHECK(s.scores[i - 1] <= s.scores[i]);
  }
}

}  // namespace

TEST_CASE("run configuration validation names the field") {
  RunConfig c = tiny(20, 64, 1);
  CHECK(error_of(c).empty());
  c.training_size = 65;
  CHECK(error_of(c).rfind("training_size:", 0) == 0);
  c = tiny(18, 64, 1);
  CHECK(error_of(c).rfind("n:", 0) == 0);
  c = tiny(20, 0, 1);
  CHECK(error_of(c).rfind("sample_size:", 0) == 0);
  c = tiny(20, 64, 1);
  c.n_embd = 18;
  c.n_head = 4;
  CHECK(error_of(c).rfind("n_embd:", 0) == 0);
  c = tiny(20, 64, 1);
  c.temperature = 0;
  CHECK(error_of(c).rfind("temperature:", 0) == 0);
  c = tiny(20, 64, 1);
  c.stacking = 13;
  CHECK(error_of(c).rfind("stacking:", 0) == 0);

  c = tiny(172, 64, 1);
  c.segment_sums = SegmentSums{1, 5, 5, 11};
  CHECK(error_of(c).empty());
  c.segment_sums = SegmentSums{-11, 5, 1, -5};
  CHECK(error_of(c).empty());
  c.segment_sums = SegmentSums{2, 2, 2, 2};
  const std::string parity = error_of(c);
  CHECK(parity.rfind("segment_sums:", 0) == 0);
  CHECK(parity.find("parity") != std::string::npos);
  CHECK(parity.find("43") != std::string::npos);
  c.segment_sums = SegmentSums{1, 1, 1, 1};
  const std::string squares = error_of(c);
  CHECK(squares.find("segment_sum_solutions") != std::string::npos);
  CHECK(squares.find("1,5,5,11") != std::string::npos);
}

TEST_CASE("segment sum parsing") {
  CHECK(parse_segment_sums("1,3,7,9") == SegmentSums{1, 3, 7, 9});
  CHECK(parse_segment_sums("-1, 3,7,9") == SegmentSums{-1, 3, 7, 9});
  CHECK_THROWS_AS(parse_segment_sums("1,3,7"), std::invalid_argument);
  CHECK_THROWS_AS(parse_segment_sums("1,3,7,9,1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_segment_sums("1,x,7,9"), std::invalid_argument);
  CHECK(format_segment_sums({1, 3, 7, 9}) == "1,3,7,9");
}

TEST_CASE("run configuration json round trip") {
  RunConfig c = tiny(36, 100, 3, 123456789012345ULL);
  c.segment_sums = SegmentSums{1, 1, 3, 5};
  c.precision = Precision::f64;
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(run_config_from_json({{"nope", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from_json({{"n", "x"}}), std::invalid_argument);
}

TEST_CASE("init_population") {
  SUBCASE("fixed sums at n=140") {
    RunConfig c = tiny(140, 4000, 1);
    c.segment_sums = SegmentSums{1, 3, 7, 9};
    Rng rng(3);
    const auto pop = init_population(c, rng);
    CHECK(pop.size() == 4000);
    std::set<SegmentSums> signed_patterns;
    for (const GsArray& a : pop) {
      CHECK(satisfies_sums(a, *c.segment_sums));
      signed_patterns.insert(segment_sums(a));
    }
    // Random order and signs: all 4! * 2^4 signed assignments occur.
    CHECK(signed_patterns.size() == 384);
  }
  SUBCASE("unconstrained entries are unbiased") {
    RunConfig c = tiny(28, 2000, 1);
    Rng rng(4);
    const auto pop = init_population(c, rng);
    double total = 0;
    for (const GsArray& a : pop) {
      for (auto e : a.entries()) total += e;
    }
    const double count = 2000.0 * 28.0;
    CHECK(std::abs(total / count) <= 3.0 / std::sqrt(count));
  }
  SUBCASE("n=4 arrays all score 0") {
    RunConfig c = tiny(4, 64, 1);
    Rng rng(5);
    for (const GsArray& a : init_population(c, rng)) {
      CHECK(a.order() == 4);
      CHECK(score(a) == 0.0);
    }
  }
  SUBCASE("arrangements of a fixed sum are uniform") {
    // n=12: sums (1,1,1,3); a segment with sum +1 has 3 arrangements.
    RunConfig c = tiny(12, 6000, 1);
    c.segment_sums = SegmentSums{1, 1, 1, 3};
    Rng rng(6);
    std::map<std::string, int> freq;
    int total = 0;
    for (const GsArray& a : init_population(c, rng)) {
      for (int i = 0; i < 4; ++i) {
        int k = 0;
        std::string s;
        for (auto e : a.segment(i)) {
          k += e;
          s += e > 0 ? '+' : '-';
        }
        if (k == 1) {
          ++freq[s];
          ++total;
        }
      }
    }
    CHECK(freq.size() == 3);
    for (const auto& [s, f] : freq) {
      const double p = 1.0 / 3.0, sd = std::sqrt(total * p * (1 - p));
      CHECK(std::abs(f - total * p) <= 4 * sd);
    }
  }
  SUBCASE("infeasible sums are rejected") {
    RunConfig c = tiny(36, 10, 1);
    c.segment_sums = SegmentSums{1, 1, 1, 1};
    Rng rng(1);
    CHECK_THROWS_AS(init_population(c, rng), std::invalid_argument);
  }
}

TEST_CASE("project_to_sums uses the fewest flips") {
  // Brute force over all 2^12 arrays of order 12: the minimal Hamming
  // distance to the solution set matches the projection.
  const SegmentSums target{1, 1, 1, 3};
  std::vector<GsArray> solutions;
  for (int mask = 0; mask < 4096; ++mask) {
    std::vector<std::int8_t> e(12);
    for (int j = 0; j < 12; ++j) e[static_cast<std::size_t>(j)] = (mask >> j & 1) ? 1 : -1;
    GsArray a(12, e);
    if (satisfies_sums(a, target)) solutions.push_back(a);
  }
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::int8_t> e(12);
    for (auto& x : e) x = (rng() & 1) ? 1 : -1;
    const GsArray a(12, e);
    const GsArray p = project_to_sums(a, target, rng);
    CHECK(satisfies_sums(p, target));
    auto dist = [](const GsArray& x, const GsArray& y) {
      int d = 0;
      for (std::size_t i = 0; i < x.entries().size(); ++i) d += x.entries()[i] != y.entries()[i];
      return d;
    };
    int best = 100;
    for (const GsArray& s : solutions) best = std::min(best, dist(a, s));
    CHECK(dist(a, p) == best);
    if (satisfies_sums(a, target)) CHECK(p == a);
  }
}

TEST_CASE("generation 0 at n=4 archives the single class") {
  RunState s = start_run(tiny(4, 64, 1));
  run_generation(s);
  REQUIRE(s.archive.size() == 1);
  CHECK(s.archive[0].key() == "++++");
  CHECK(s.stats.size() == 1);
  CHECK(s.stats[0].hadamard_ratio_sample == 1.0);
  CHECK(s.stats[0].hadamard_ratio_selected == 1.0);
  CHECK(s.finished());
  CHECK_THROWS_AS(run_generation(s), std::logic_error);
}

TEST_CASE("three generations at n=20 fill the archive") {
  RunState s = start_run(tiny(20, 1024, 3));
  std::vector<std::string> warnings;
  GenerationHooks hooks;
  hooks.warn = [&](const std::string& w) { warnings.push_back(w); };
  int checkpoints = 0;
  hooks.before_train = [&](const RunState& st, std::span<const GsArray> found) {
    ++checkpoints;
    CHECK(st.pending_train);
    CHECK(st.archive.size() >= found.size());
  };
  while (!s.finished()) {
    run_generation(s, hooks);
    check_state_invariants(s);
  }
  CHECK(checkpoints == 3);
  CHECK(s.stats.size() == 3);
  CHECK(!s.archive.empty());
  // Order 20 has only a handful of classes, fewer than training_size.
  CHECK(!s.population.empty());
  CHECK(s.population.size() <= 102);
  for (std::size_t g = 0; g < s.stats.size(); ++g) {
    CHECK(s.stats[g].gen == static_cast<int>(g));
    CHECK(std::isfinite(s.stats[g].loss_train));
    CHECK(s.stats[g].archive_size == static_cast<std::int64_t>(g + 1 < s.stats.size() ? s.stats[g].archive_size : s.archive.size()));
    if (g > 0) CHECK(s.stats[g].archive_size >= s.stats[g - 1].archive_size);
  }
  // Training sees the same population it selected: losses are those of a
  // resumed model, lower than a fresh one.
  CHECK(s.stats[2].loss_train < std::log(8.0));
}

TEST_CASE("checkpoint and restore continue bit-exactly") {
  const RunConfig cfg = tiny(20, 256, 3, 99);
  RunState full = start_run(cfg);
  Container mid_pending, after_one;
  GenerationHooks hooks;
  hooks.before_train = [&](const RunState& st, std::span<const GsArray>) {
    if (st.generation == 1) mid_pending = checkpoint_container(st);
  };
  hooks.after_generation = [&](const RunState& st) {
    if (st.generation == 1) after_one = checkpoint_container(st);
  };
  while (!full.finished()) run_generation(full, hooks);

  auto same = [&](const RunState& a, const RunState& b) {
    REQUIRE(a.stats.size() == b.stats.size());
    for (std::size_t g = 0; g < a.stats.size(); ++g) CHECK(stats_csv_row(a.stats[g]) == stats_csv_row(b.stats[g]));
    CHECK(a.archive == b.archive);
    CHECK(a.population == b.population);
    CHECK(a.scores == b.scores);
    CHECK(a.model.blobs() [0].bytes == b.model.blobs()[0].bytes);
    CHECK(a.model.blobs()[1].bytes == b.model.blobs()[1].bytes);
    CHECK(a.model.optimizer_step() == b.model.optimizer_step());
    CHECK(std::vector<double>(a.ladder.temperatures().begin(), a.ladder.temperatures().end()) ==
          std::vector<double>(b.ladder.temperatures().begin(), b.ladder.temperatures().end()));
  };

  SUBCASE("from the end of a generation") {
    RunState resumed = restore_state(decode_container(encode_container(after_one)));
    CHECK(resumed.generation == 1);
    CHECK(!resumed.pending_train);
    while (!resumed.finished()) run_generation(resumed);
    same(full, resumed);
  }
  SUBCASE("from before training") {
    RunState resumed = restore_state(decode_container(encode_container(mid_pending)));
    CHECK(resumed.pending_train);
    while (!resumed.finished()) run_generation(resumed);
    same(full, resumed);
  }
  SUBCASE("truncated file") {
    auto bytes = encode_container(after_one);
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(restore_state(decode_container(bytes)), ContainerError);
  }
  SUBCASE("run state version bump") {
    Container c = after_one;
    c.manifest["run_version"] = 2;
    try {
      restore_state(decode_container(encode_container(c)));
      FAIL("restored an incompatible checkpoint");
    } catch (const ContainerError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }
  SUBCASE("not a run checkpoint") {
    Container c = after_one;
    c.manifest["kind"] = "model";
    CHECK_THROWS_AS(restore_state(c), ContainerError);
  }
}

TEST_CASE("segment-sum mode keeps the sums everywhere") {
  RunConfig cfg = tiny(36, 512, 2, 5);
  cfg.segment_sums = SegmentSums{1, 1, 3, 5};
  RunState s = start_run(cfg);
  GenerationHooks hooks;
  hooks.before_train = [&](const RunState& st, std::span<const GsArray> found) {
    for (const GsArray& a : st.population) CHECK(satisfies_sums(a, *cfg.segment_sums));
    for (const GsArray& a : found) CHECK(satisfies_sums(a, *cfg.segment_sums));
  };
  while (!s.finished()) run_generation(s, hooks);
  for (const GenerationStats& st : s.stats) REQUIRE(st.sum_ratio_sample.has_value());
  CHECK(*s.stats[0].sum_ratio_sample == 1.0);
  check_state_invariants(s);
}

TEST_CASE("run directory outputs and resume") {
  const RunConfig cfg = tiny(20, 256, 3, 21);
  const auto dir_a = scratch_dir("a"), dir_b = scratch_dir("b"), dir_c = scratch_dir("c");
  {
    RunState s = start_run(cfg);
    run_loop(s, RunDirectory(dir_a));
  }
  const std::string csv = slurp(dir_a / "stats.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind(stats_csv_header(), 0) == 0);
  CHECK(csv.find("wall_seconds") == std::string::npos);
  const std::string jsonl = slurp(dir_a / "stats.jsonl");
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
  CHECK(jsonl.find("wall_seconds") != std::string::npos);
  const auto archive = parse_arrays(slurp(dir_a / "archive.txt"));
  CHECK(!archive.empty());
  for (const GsArray& a : archive) CHECK(verify_hadamard(build_matrix(a)));
  const RunDirectory a(dir_a);
  REQUIRE(a.latest_checkpoint().has_value());
  CHECK(a.latest_checkpoint()->filename() == "gen-002");

  // Same config with another thread count: identical bytes.
  const int threads = omp_get_max_threads();
  omp_set_num_threads(3);
  {
    RunState s = start_run(cfg);
    run_loop(s, RunDirectory(dir_b));
  }
  omp_set_num_threads(threads);
  CHECK(slurp(dir_b / "stats.csv") == csv);
  CHECK(slurp(dir_b / "archive.txt") == slurp(dir_a / "archive.txt"));

  // Resume from generation 0 into a directory holding stale output.
  std::filesystem::create_directories(dir_c);
  std::ofstream(dir_c / "stats.csv") << "stale\n";
  {
    RunState s = load_checkpoint(a.checkpoint_path(0));
    run_loop(s, RunDirectory(dir_c));
  }
  CHECK(slurp(dir_c / "stats.csv") == csv);
  CHECK(slurp(dir_c / "archive.txt") == slurp(dir_a / "archive.txt"));

  // A truncated checkpoint file is rejected with its path in the message.
  const auto broken = dir_c / "broken";
  const std::string bytes = slurp(a.checkpoint_path(1));
  std::ofstream(broken, std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  try {
    load_checkpoint(broken);
    FAIL("loaded a truncated checkpoint");
  } catch (const ContainerError& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
  for (const auto& d : {dir_a, dir_b, dir_c}) std::filesystem::remove_all(d);
}

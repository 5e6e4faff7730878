// Acceptance report: one line per criterion with the measured values.
// Exit status is 0 when every check ran; --strict makes any FAIL fatal.

#include <omp.h>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "gsh/enumerate.hpp"
#include "gsh/improve.hpp"
#include "gsh/loop.hpp"
#include "gsh/matrix.hpp"
#include "gsh/model.hpp"
#include "gsh/search.hpp"
#include "gsh/segment_sums.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"
#include "gsh/tempering.hpp"
#include "gsh/text_format.hpp"
#include "support/oracles.hpp"

using namespace gsh;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Result {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  const int code = cli::run(args, out, std::cerr, {});
  std::cerr << out.str();
  return code;
}

bool same_score(double a, double b, double tol) {
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) && std::isinf(b);
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(a));
}

// ---- 1 ------------------------------------------------------------------

void structural_identity(Result& r) {
  const auto t0 = Clock::now();
  Rng rng(101);
  int checked = 0, held = 0;
  for (int n : {4, 8, 12, 20, 28}) {
    for (int t = 0; t < 1000; ++t) {
      const GsArray a = oracle::random_array(n, rng);
      ++checked;
      held += gram(build_matrix(a)) == oracle::block_gram(a) ? 1 : 0;
    }
  }
  const double secs = seconds_since(t0);
  r.detail << held << "/" << checked << " exact, " << secs << " s";
  r.check(held == checked, "identity");
  r.check(secs < 30.0, "time < 30 s");
}

// ---- 2 ------------------------------------------------------------------

void score_determinant(Result& r, const std::vector<GsArray>& archive) {
  Rng rng(102);
  double worst = 0.0;
  int singular = 0;
  for (int n : {8, 12, 16, 20}) {
    for (int t = 0; t < 100; ++t) {
      const GsArray a = oracle::random_array(n, rng);
      const IntMatrix m = build_matrix(a);
      const long double det = oracle::determinant(gram(m));
      const Spectrum sp = spectrum(a);
      long double prod = 1.0L;
      for (double p : sp.power) prod *= static_cast<long double>(n) * p;
      const long double expect = prod * prod * prod * prod;
      if (expect < 0.5L) {
        // A vanishing mode: the integer determinant must be exactly zero.
        ++singular;
        r.check(std::abs(det) < 0.5L, "singular Gram at n=" + std::to_string(n));
        continue;
      }
      worst = std::max(worst, static_cast<double>(std::abs(det - expect) / expect));
    }
  }
  int agree = 0;
  for (const GsArray& a : archive) {
    const bool zero = score(a) < kHadamardScoreThreshold;
    agree += zero == verify_hadamard(build_matrix(a)) && zero ? 1 : 0;
  }
  // Exhaustive both ways at n = 8 and 12.
  int mismatches = 0;
  for (int n : {8, 12}) {
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
      const GsArray a = oracle::array_from_bits(n, bits);
      mismatches += (score(a) < kHadamardScoreThreshold) != verify_hadamard(build_matrix(a)) ? 1 : 0;
    }
  }
  r.detail << "max rel det error " << worst << " (" << singular << " singular), archive " << agree << "/"
           << archive.size() << " score-0 and Hadamard, exhaustive n=8,12 mismatches " << mismatches;
  r.check(worst <= 1e-6, "det within 1e-6");
  r.check(agree == static_cast<int>(archive.size()), "archive");
  r.check(!archive.empty(), "non-empty archive");
  r.check(mismatches == 0, "exhaustive equivalence");
}

// ---- 3 ------------------------------------------------------------------

void enumeration(Result& r) {
  const auto t0 = Clock::now();
  const std::vector<std::pair<int, std::int64_t>> goldens = {{4, 16}, {8, 96}};
  std::vector<std::pair<int, double>> counts;
  for (int n = 4; n <= 24; n += 4) {
    const EnumerateResult e = enumerate_gs(n);
    counts.emplace_back(n, static_cast<double>(e.count));
    r.detail << "n=" << n << ":" << e.count << " ";
    r.check(e.disagreements == 0, "checkers agree at n=" + std::to_string(n));
    for (const auto& [gn, gc] : goldens) {
      if (gn == n) r.check(e.count == gc, "golden n=" + std::to_string(n));
    }
    if (n <= 12) {
      const auto brute = static_cast<std::int64_t>(oracle::brute_force_count(n));
      r.check(brute == e.count, "dense brute force n=" + std::to_string(n));
    }
    if (n <= kMaxBruteForceOrder) {
      const BruteForceResult b = brute_force_count(n);
      r.check(b.exact == e.count && b.disagreements == 0, "checker brute force n=" + std::to_string(n));
    }
  }
  const double base = growth_report(counts);
  const double secs = seconds_since(t0);
  r.detail << "growth base " << base << ", " << secs << " s";
  r.check(base >= 1.3 && base <= 1.9, "growth base in [1.3, 1.9]");
  r.check(secs < 600.0, "time < 10 min");
}

// ---- 4 ------------------------------------------------------------------

void symmetry_suite(Result& r) {
  Rng rng(104);
  std::vector<GsArray> hadamards;
  for (int n : {12, 20}) {
    EnumerateOptions o;
    o.keep_arrays = true;
    o.orbit_count = false;
    const auto all = enumerate_gs(n, o).arrays;
    for (int t = 0; t < 50; ++t) hadamards.push_back(all[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(all.size())))]);
  }
  {
    // Listing all of n=28 is heavy; local search finds enough of them.
    std::vector<GsArray> starts;
    for (int t = 0; t < 512; ++t) starts.push_back(oracle::random_array(28, rng));
    TemperatureLadder ladder = TemperatureLadder::geometric(4, 0.05, 0.5);
    const ImproveResult found = improve(starts, 1, ImproveConfig{}, ladder, 104);
    int kept = 0;
    for (const GsArray& a : found.arrays) {
      if (kept < 50 && verify_hadamard(build_matrix(a))) {
        hadamards.push_back(a);
        ++kept;
      }
    }
    r.check(kept > 0, "n=28 Hadamards from search");
  }
  std::ifstream in(GSH_TEST_DATA_DIR "/large_orders.txt");
  for (const GsArray& h : read_arrays(in)) hadamards.push_back(h);

  int pairs = 0, score_ok = 0, orbit_ok = 0, idem_ok = 0;
  for (int len : {3, 5, 7, 35}) {
    for (int t = 0; t < 10000; ++t) {
      const GsArray a = oracle::random_array(4 * len, rng);
      const GsArray b = random_element(len, rng).apply(a);
      const GsArray c = canonicalize(a);
      ++pairs;
      score_ok += same_score(score(a), score(b), 1e-10) ? 1 : 0;
      orbit_ok += canonicalize(b) == c ? 1 : 0;
      idem_ok += canonicalize(c) == c ? 1 : 0;
    }
  }
  int had_pairs = 0, had_ok = 0;
  for (const GsArray& h : hadamards) {
    for (int t = 0; t < 20; ++t) {
      ++had_pairs;
      had_ok += verify_hadamard(build_matrix(random_element(h.segment_length(), rng).apply(h))) ? 1 : 0;
    }
  }
  r.detail << "score " << score_ok << "/" << pairs << ", orbit " << orbit_ok << "/" << pairs << ", idempotent "
           << idem_ok << "/" << pairs << ", Hadamard kept " << had_ok << "/" << had_pairs
           << " (n'=3,5,7 and 51..61; no n'=35 Hadamard at hand)";
  r.check(score_ok == pairs, "score invariance");
  r.check(orbit_ok == pairs, "orbit constancy");
  r.check(idem_ok == pairs, "idempotence");
  r.check(had_ok == had_pairs, "Hadamard preservation");
}

// ---- 5 ------------------------------------------------------------------

void incremental_search(Result& r) {
  Rng rng(105);
  double worst = 0.0;
  int flips = 0;
  for (int n : {12, 36, 60, 148}) {
    SearchState s(oracle::random_array(n, rng));
    for (int t = 0; t < 25000; ++t, ++flips) {
      const Flip f{uniform_index(rng, 4), uniform_index(rng, n / 4)};
      const double inc = flip_score(s, f.segment, f.index);
      GsArray g = s.array();
      g.flip(f.segment, f.index);
      const double full = score(g);
      if (std::isinf(inc) || std::isinf(full)) {
        if (std::isinf(inc) != std::isinf(full)) worst = kInfiniteScore;
      } else {
        worst = std::max(worst, std::abs(inc - full));
      }
      s.apply(std::span<const Flip>(&f, 1));
    }
  }
  int monotone_violations = 0;
  for (int t = 0; t < 200; ++t) {
    SearchState s(oracle::random_array(36, rng));
    double last = s.score();
    while (multi_bit_step(s, 1)) {
      if (!(s.score() <= last || std::isinf(last))) ++monotone_violations;
      last = s.score();
    }
    for (int w = 2; w <= 3; ++w) {
      if (multi_bit_step(s, w)) {
        if (!(s.score() <= last)) ++monotone_violations;
        last = s.score();
      }
    }
    for (int seg = 0; seg < 4; ++seg) {
      segment_resample(s, seg, 0.3, rng);
      if (!(s.score() <= last)) ++monotone_violations;
      last = s.score();
    }
  }
  int sum_violations = 0, moves = 0;
  for (int t = 0; t < 20; ++t) {
    SearchState s(oracle::random_array(36, rng));
    const SegmentSums k = segment_sums(s.array());
    for (int m = 0; m < 5000; ++m, ++moves) {
      constrained_move(s, rng, m % 2 == 0 ? 0.0 : 0.5);
      sum_violations += segment_sums(s.array()) != k ? 1 : 0;
    }
    swap_descent(s);
    sum_violations += segment_sums(s.array()) != k ? 1 : 0;
    descend(s, ImproveConfig{.preserve_sums = true});
    sum_violations += segment_sums(s.array()) != k ? 1 : 0;
  }
  r.detail << "max flip error " << worst << " over " << flips << " flips, monotone violations "
           << monotone_violations << ", sum violations " << sum_violations << "/" << moves;
  r.check(worst <= 1e-9, "flip error <= 1e-9");
  r.check(monotone_violations == 0, "monotone descent");
  r.check(sum_violations == 0, "sums conserved");
}

// ---- 6 ------------------------------------------------------------------

// First sweep (0-based) whose window acceptance is in range, or -1, and
// the mean acceptance over sweeps 80..99.
std::pair<int, double> autotune_run(int n, double t_cold, double t_hot) {
  Rng rng(106);
  TemperatureLadder ladder({t_cold, t_hot});
  std::vector<SearchState> states;
  for (int b = 0; b < 256; ++b) states.emplace_back(oracle::random_array(n, rng));
  TemperingOptions manual;
  manual.autotune = false;
  int entered = -1;
  double tail = 0.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    tempering_sweep(states, ladder, 1, 600 + static_cast<std::uint64_t>(sweep), manual);
    const double acc = ladder.window_acceptance(0);
    if (entered < 0 && acc >= ladder.target_lo() && acc <= ladder.target_hi()) entered = sweep;
    if (sweep >= 80) tail += acc / 20.0;
    ladder.autotune();
  }
  return {entered, tail};
}

void tempering(Result& r) {
  Rng rng(107);
  const int trials = 100000;
  double worst_sigma = 0.0;
  for (const auto& [delta, temp] : std::vector<std::pair<double, double>>{{0.7, 0.5}, {0.1, 1.0}, {2.0, 0.4}}) {
    const double p = std::exp(-delta / temp);
    int acc = 0;
    for (int t = 0; t < trials; ++t) acc += metropolis_accept(delta, temp, uniform01(rng)) ? 1 : 0;
    worst_sigma = std::max(worst_sigma, std::abs(acc - trials * p) / std::sqrt(trials * p * (1 - p)));
  }
  int equal_rejected = 0;
  for (int t = 0; t < trials; ++t) {
    const double temp = 0.01 + uniform01(rng);
    equal_rejected += swap_accept(temp, temp, 50 * uniform01(rng), 50 * uniform01(rng), uniform01(rng)) ? 0 : 1;
  }
  const auto [entered12, tail12] = autotune_run(12, 0.01, 0.011);
  const auto [entered20, tail20] = autotune_run(20, 0.02, 0.021);
  // The target is reached when the tuned (late) acceptance sits in range;
  // a transient pass on the way is not a tuned state.
  const bool tuned12 = tail12 >= 0.2 && tail12 <= 0.4;
  r.detail << "Metropolis worst " << worst_sigma << " sigma, equal-T swaps rejected " << equal_rejected
           << ", n=12 late acceptance " << tail12 << " (first in-range sweep " << entered12 << "), n=20 late acceptance "
           << tail20 << " (first in-range sweep " << entered20 << ")";
  r.check(worst_sigma <= 3.0, "Metropolis within 3 sigma");
  r.check(equal_rejected == 0, "equal-T swaps");
  r.check(tuned12, "n=12 autotune in [0.2,0.4]: 1728/4096 of n=12 arrays score 0, so swap acceptance >= 0.42");
}

// ---- 7 ------------------------------------------------------------------

void model_checks(Result& r, const fs::path& work) {
  ModelConfig c;
  c.n = 8;
  c.stacking = 3;
  c.n_layer = 2;
  c.n_embd = 16;
  c.n_head = 2;
  c.precision = Precision::f64;
  Rng rng(108);
  Model model(c, 2);
  {
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto& p : model.f64()->params()) p += normal(rng);
  }
  std::vector<GsArray> data;
  for (int t = 0; t < 3; ++t) data.push_back(oracle::random_array(8, rng));
  const TokenBatch batch = model.make_batch(data);
  model.loss_and_grad(batch);
  const auto analytic = model.f64()->grads();
  double diff2 = 0.0, norm2 = 0.0;
  const double h = 1e-5;
  auto& params = model.f64()->params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = model.loss(batch);
    params[i] = keep - h;
    const double down = model.loss(batch);
    params[i] = keep;
    const double numeric = (up - down) / (2 * h);
    diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
    norm2 += numeric * numeric + analytic[i] * analytic[i];
  }
  const double grad_rel = std::sqrt(diff2 / norm2);

  // Overfit: eight sequences behind one begin token leave log(8) nats per
  // sequence that no model can remove; the excess over that floor is what
  // must fall below 0.01 nats/token.
  ModelConfig oc;
  oc.n = 20;
  oc.stacking = 4;
  oc.n_layer = 2;
  oc.n_embd = 32;
  oc.n_head = 2;
  Model over(oc, 4);
  std::vector<GsArray> batch8;
  for (int t = 0; t < 8; ++t) batch8.push_back(oracle::random_array(20, rng));
  TrainConfig tc;
  tc.steps = 500;
  tc.batch_size = 64;
  tc.learning_rate = 3e-3;
  tc.augment = false;
  tc.adamw.weight_decay = 0.0;
  over.train(batch8, tc, 9);
  const double loss = over.loss(over.make_batch(batch8));
  const double floor = std::log(8.0) / oc.context_length();

  int round_trips = 0, round_ok = 0;
  for (int s = 1; s <= 12; ++s) {
    for (int t = 0; t < 500; ++t) {
      const GsArray a = oracle::random_array(4 * (1 + uniform_index(rng, 16)), rng);
      ++round_trips;
      round_ok += detokenize(tokenize(a, s), a.order(), s) == a ? 1 : 0;
    }
  }

  const int len = model.config().context_length();
  const int vocab = model.config().vocab_out();
  std::vector<int> ids(static_cast<std::size_t>(len));
  for (auto& id : ids) id = uniform_index(rng, model.config().vocab_in());
  const auto base = model.logits(ids, 1, len);
  int leaks = 0;
  for (int p = 0; p < len; ++p) {
    auto changed = ids;
    changed[static_cast<std::size_t>(p)] = (changed[static_cast<std::size_t>(p)] + 1) % model.config().vocab_in();
    const auto out = model.logits(changed, 1, len);
    for (int q = 0; q < p * vocab; ++q) leaks += out[static_cast<std::size_t>(q)] != base[static_cast<std::size_t>(q)] ? 1 : 0;
  }

  const fs::path path = work / "model.ckpt";
  over.save(path);
  const Model back = Model::load(path);
  const auto b8 = over.make_batch(batch8);
  const bool params_equal = back.parameter_count() == over.parameter_count() &&
                            const_cast<Model&>(back).f32()->params() == over.f32()->params();
  const bool logits_equal = back.logits(b8.inputs, b8.batch, b8.length) == over.logits(b8.inputs, b8.batch, b8.length);

  r.detail << "grad rel error " << grad_rel << ", overfit loss " << loss << " nats/token (floor " << floor
           << ", excess " << loss - floor << "), tokenizer " << round_ok << "/" << round_trips << ", causal leaks "
           << leaks << ", checkpoint params " << (params_equal ? "equal" : "differ") << ", logits "
           << (logits_equal ? "equal" : "differ");
  r.check(grad_rel <= 1e-5, "gradient");
  r.check(loss - floor < 0.01, "overfit");
  r.check(round_ok == round_trips, "tokenizer");
  r.check(leaks == 0, "causality");
  r.check(params_equal && logits_equal, "checkpoint");
}

// ---- 8 ------------------------------------------------------------------

struct EndToEnd {
  double seconds = 0.0;
  int exit_code = -1;
  std::vector<GsArray> archive;
};

EndToEnd end_to_end_run(const fs::path& dir) {
  fs::remove_all(dir);
  EndToEnd e;
  const auto t0 = Clock::now();
  e.exit_code = run_cli({"run", "--n", "36", "--sample-size", "4096", "--generations", "5", "--seed", "1", "--out",
                         dir.string()});
  e.seconds = seconds_since(t0);
  if (fs::exists(dir / "archive.txt")) e.archive = parse_arrays(slurp(dir / "archive.txt"));
  return e;
}

void end_to_end(Result& r, const EndToEnd& e) {
  int verified = 0;
  std::set<std::string> forms;
  int noncanonical = 0;
  for (const GsArray& a : e.archive) {
    verified += verify_hadamard(build_matrix(a)) ? 1 : 0;
    const GsArray c = canonicalize(a);
    noncanonical += c == a ? 0 : 1;
    forms.insert(c.key());
  }
  r.detail << "exit " << e.exit_code << ", " << e.seconds << " s on " << omp_get_max_threads() << " thread(s), archive "
           << e.archive.size() << " (" << verified << " verified, " << forms.size() << " distinct forms)";
  r.check(e.exit_code == 0, "exit code");
  r.check(!e.archive.empty(), ">= 1 Hadamard");
  r.check(verified == static_cast<int>(e.archive.size()), "all verified");
  r.check(forms.size() == e.archive.size() && noncanonical == 0, "distinct canonical forms");
  r.check(e.seconds <= 600.0, "<= 10 min");
}

// ---- 9 ------------------------------------------------------------------

struct SumsRun {
  int generations = 4;
  int sample_size = 1024;
  int training_steps = 6000;
  double learning_rate = 1e-3;
};

void segment_sum_mode(Result& r, const SumsRun& run) {
  // Converging on the sum constraint takes thousands of steps, so this run
  // trains a smaller model for longer than the defaults.
  RunConfig c;
  c.n = 36;
  c.sample_size = run.sample_size;
  c.generations = run.generations;
  c.training_steps = run.training_steps;
  c.learning_rate = run.learning_rate;
  c.n_layer = 2;
  c.n_embd = 64;
  c.seed = 9;
  c.segment_sums = SegmentSums{1, 1, 3, 5};
  c.validate();
  const SegmentSums target = sorted_abs(*c.segment_sums);
  auto ok = [&](const GsArray& a) { return sorted_abs(segment_sums(a)) == target; };

  Rng rng(109);
  int init_bad = 0;
  for (const GsArray& a : init_population(c, rng)) init_bad += ok(a) ? 0 : 1;

  RunState state = start_run(c);
  int state_bad = 0, states = 0;
  std::vector<double> ratios;
  std::string failure;
  GenerationHooks hooks;
  hooks.before_train = [&](const RunState& s, std::span<const GsArray>) {
    for (const GsArray& a : s.population) {
      ++states;
      state_bad += ok(a) ? 0 : 1;
    }
    for (const GsArray& a : s.archive) {
      ++states;
      state_bad += ok(a) ? 0 : 1;
    }
  };
  try {
    while (!state.finished()) {
      run_generation(state, hooks);
      ratios.push_back(state.stats.back().sum_ratio_sample.value_or(-1.0));
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  std::ostringstream series;
  for (double x : ratios) series << (series.tellp() > 0 ? "," : "") << x;
  r.detail << "initial violations " << init_bad << ", state violations " << state_bad << "/" << states
           << ", raw sample ratio by generation [" << series.str() << "], archive " << state.archive.size();
  r.check(failure.empty(), "loop error: " + failure);
  r.check(init_bad == 0, "initial population");
  r.check(state_bad == 0, "intermediate states");
  r.check(!ratios.empty() && ratios.back() >= 0.9, "raw ratio >= 0.9 after convergence");
}

// ---- 10 -----------------------------------------------------------------

void determinism(Result& r, const fs::path& work) {
  const std::vector<std::string> base = {"run", "--n", "36", "--sample-size", "1024", "--generations", "3", "--seed",
                                         "10", "--n-layer", "2", "--n-embd", "32", "--n-head", "2", "--training-steps",
                                         "60"};
  std::vector<std::string> contents;
  std::ostringstream codes;
  for (int threads : {1, 4}) {
    const fs::path dir = work / ("det-" + std::to_string(threads));
    fs::remove_all(dir);
    std::vector<std::string> args = base;
    args.insert(args.end(), {"--threads", std::to_string(threads), "--out", dir.string()});
    codes << run_cli(args) << " ";
    contents.push_back(slurp(dir / "stats.csv"));
    contents.push_back(slurp(dir / "archive.txt"));
  }
  const bool stats_same = contents[0] == contents[2] && !contents[0].empty();
  const bool archive_same = contents[1] == contents[3] && !contents[1].empty();
  r.detail << "exit codes " << codes.str() << "threads 1 vs 4: stats.csv " << (stats_same ? "identical" : "differ")
           << ", archive.txt " << (archive_same ? "identical" : "differ") << " (" << contents[1].size() << " bytes)";
  r.check(stats_same, "stats.csv identical");
  r.check(archive_same, "archive.txt identical");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance report"};
  std::vector<int> only;
  bool strict = false;
  std::string work_dir = (fs::temp_directory_path() / "gsh-acceptance").string();
  SumsRun sums;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--strict", strict, "exit 1 if any criterion fails");
  app.add_option("--work-dir", work_dir, "scratch directory");
  app.add_option("--sums-generations", sums.generations, "generations of the segment-sum run");
  app.add_option("--sums-sample-size", sums.sample_size, "sample size of the segment-sum run");
  app.add_option("--sums-steps", sums.training_steps, "first-generation training steps of the segment-sum run");
  app.add_option("--sums-lr", sums.learning_rate, "learning rate of the segment-sum run");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::create_directories(work);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  EndToEnd e2e;
  if (wanted(8) || wanted(2)) {
    std::cerr << "end-to-end run at n=36...\n";
    e2e = end_to_end_run(work / "e2e");
  }

  const std::vector<std::pair<int, std::function<void(Result&)>>> criteria = {
      {1, structural_identity},
      {2, [&](Result& r) { score_determinant(r, e2e.archive); }},
      {3, enumeration},
      {4, symmetry_suite},
      {5, incremental_search},
      {6, tempering},
      {7, [&](Result& r) { model_checks(r, work); }},
      {8, [&](Result& r) { end_to_end(r, e2e); }},
      {9, [&](Result& r) { segment_sum_mode(r, sums); }},
      {10, [&](Result& r) { determinism(r, work); }},
  };
  int failed = 0;
  std::vector<std::string> lines;
  for (const auto& [id, fn] : criteria) {
    if (!wanted(id)) continue;
    std::cerr << "criterion " << id << "...\n";
    Result r;
    const auto t0 = Clock::now();
    try {
      fn(r);
    } catch (const std::exception& ex) {
      r.check(false, std::string("exception: ") + ex.what());
    }
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d %s (%.1f s): ", id, r.pass ? "PASS" : "FAIL", seconds_since(t0));
    lines.push_back(head + r.detail.str());
    std::cout << lines.back() << std::endl;
    failed += r.pass ? 0 : 1;
  }
  std::cout << "summary: " << lines.size() - static_cast<std::size_t>(failed) << "/" << lines.size() << " passed"
            << std::endl;
  return strict && failed > 0 ? 1 : 0;
}

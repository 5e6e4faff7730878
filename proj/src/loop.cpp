#include "gsh/loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "gsh/matrix.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"

namespace gsh {

namespace {

// Stream tags of the generation phases.
constexpr std::uint64_t kInitTag = 0x696e6974;
constexpr std::uint64_t kSampleTag = 0x73616d70;
constexpr std::uint64_t kProjectTag = 0x70726f6a;
constexpr std::uint64_t kImproveTag = 0x696d7072;
constexpr std::uint64_t kTrainTag = 0x74726169;
constexpr std::uint64_t kModelTag = 0x6d6f6465;

void need(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument(field + ": " + what);
}

std::string list_solutions(int n) {
  std::string out;
  for (const SegmentSums& k : segment_sum_solutions(n)) {
    if (!out.empty()) out += "; ";
    out += format_segment_sums(k);
  }
  return out.empty() ? "none" : out;
}

void check_segment_sums(int n, const SegmentSums& k) {
  const int len = n / 4;
  for (int v : k) {
    need((std::abs(v) - len) % 2 == 0, "segment_sums",
         format_segment_sums(k) + " violates parity: every k_i must be " + (len % 2 ? "odd" : "even") +
             " since n' = " + std::to_string(len));
    need(std::abs(v) <= len, "segment_sums", "|k_i| must not exceed n' = " + std::to_string(len));
  }
  need(sum_of_squares(k) == n, "segment_sums",
       format_segment_sums(k) + " has sum of squares " + std::to_string(sum_of_squares(k)) + ", not n = " +
           std::to_string(n) + "; valid choices (segment_sum_solutions): " + list_solutions(n));
}

struct Scored {
  GsArray array;
  double score = 0.0;
  bool hadamard = false;
};

// Canonical form with its score; verified Hadamards get score exactly 0.
Scored evaluate(const GsArray& a) {
  Scored s{canonicalize(a), 0.0, false};
  s.score = score(s.array);
  if (s.score < kHadamardScoreThreshold && is_hadamard(s.array)) {
    s.hadamard = true;
    s.score = 0.0;
  }
  return s;
}

double finite_mean(std::span<const double> values) {
  double total = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      total += v;
      ++count;
    }
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(count);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int RunConfig::effective_training_size() const {
  return training_size > 0 ? training_size : std::max(1, sample_size / 10);
}

int RunConfig::effective_warmup_steps() const {
  if (warmup_steps >= 0) return warmup_steps;
  return segment_sums ? training_steps / 10 : 0;
}

void RunConfig::validate() const {
  need(n >= 4 && n % 4 == 0, "n", "must be a positive multiple of 4, got " + std::to_string(n));
  need(sample_size > 0, "sample_size", "must be positive");
  need(training_size >= 0, "training_size", "must be positive (or 0 for 10% of sample_size)");
  need(effective_training_size() <= sample_size, "training_size", "must not exceed sample_size");
  need(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate", "must be positive");
  need(training_steps > 0, "training_steps", "must be positive");
  need(std::isfinite(temperature) && temperature > 0, "temperature", "must be positive");
  need(num_improve >= 0, "num_improve", "must be non-negative");
  need(stacking >= 1 && stacking <= 12, "stacking", "must be in [1, 12]");
  need(n_layer > 0, "n_layer", "must be positive");
  need(n_embd > 0, "n_embd", "must be positive");
  need(n_head > 0, "n_head", "must be positive");
  need(n_embd % n_head == 0, "n_embd", "must be divisible by n_head");
  need(generations > 0, "generations", "must be positive");
  need(batch_size > 0, "batch_size", "must be positive");
  need(resume_fraction > 0 && resume_fraction <= 1, "resume_fraction", "must be in (0, 1]");
  need(resume_lr_factor > 0, "resume_lr_factor", "must be positive");
  need(warmup_steps >= -1, "warmup_steps", "must be non-negative (or -1 for the default)");
  need(ladder_rungs >= 0, "ladder_rungs", "must be non-negative");
  if (ladder_rungs >= 2) {
    need(ladder_t_min > 0, "ladder_t_min", "must be positive");
    need(ladder_t_max > ladder_t_min, "ladder_t_max", "must exceed ladder_t_min");
  }
  if (segment_sums) check_segment_sums(n, *segment_sums);
  model_config().validate();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.n = n;
  m.stacking = stacking;
  m.n_layer = n_layer;
  m.n_embd = n_embd;
  m.n_head = n_head;
  m.uses_score = transformer_uses_score;
  m.precision = precision;
  return m;
}

TrainConfig RunConfig::train_config(int gen) const {
  TrainConfig t;
  t.batch_size = batch_size;
  if (gen == 0) {
    t.steps = training_steps;
    t.learning_rate = learning_rate;
    t.warmup_steps = effective_warmup_steps();
  } else {
    t.steps = std::max(1, static_cast<int>(std::lround(training_steps * resume_fraction)));
    t.learning_rate = learning_rate * resume_lr_factor;
    t.warmup_steps = 0;
  }
  return t;
}

ImproveConfig RunConfig::improve_config() const {
  ImproveConfig c;
  c.preserve_sums = segment_sums.has_value();
  return c;
}

SegmentSums parse_segment_sums(const std::string& text) {
  SegmentSums k{};
  std::stringstream ss(text);
  std::string item;
  int count = 0;
  while (std::getline(ss, item, ',')) {
    need(count < kSegments, "segment_sums", "expected four comma-separated integers, got '" + text + "'");
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    need(used > 0 && item.find_first_not_of(" \t", used) == std::string::npos, "segment_sums",
         "'" + item + "' is not an integer");
    k[static_cast<std::size_t>(count++)] = v;
  }
  need(count == kSegments, "segment_sums", "expected four comma-separated integers, got '" + text + "'");
  return k;
}

std::string format_segment_sums(const SegmentSums& k) {
  return std::to_string(k[0]) + "," + std::to_string(k[1]) + "," + std::to_string(k[2]) + "," +
         std::to_string(k[3]);
}

bool satisfies_sums(const GsArray& a, const SegmentSums& target) {
  return sorted_abs(segment_sums(a)) == sorted_abs(target);
}

bool is_hadamard(const GsArray& a) { return verify_hadamard(build_matrix(a)); }

RunState start_run(const RunConfig& config) {
  config.validate();
  RunState s;
  s.config = config;
  s.model = Model(config.model_config(), stream_seed({config.seed, kModelTag}));
  if (config.ladder_rungs >= 2) {
    s.ladder = TemperatureLadder::geometric(config.ladder_rungs, config.ladder_t_min, config.ladder_t_max);
  }
  return s;
}

std::vector<GsArray> init_population(const RunConfig& config, Rng& rng) {
  config.validate();
  const int n = config.n, len = n / 4;
  std::vector<GsArray> out;
  out.reserve(static_cast<std::size_t>(config.sample_size));
  std::vector<std::int8_t> e(static_cast<std::size_t>(n));
  for (int c = 0; c < config.sample_size; ++c) {
    if (!config.segment_sums) {
      for (auto& x : e) x = (rng() >> 63) ? std::int8_t{1} : std::int8_t{-1};
    } else {
      SegmentSums mags = sorted_abs(*config.segment_sums);
      for (int i = kSegments - 1; i > 0; --i) std::swap(mags[static_cast<std::size_t>(i)], mags[static_cast<std::size_t>(uniform_index(rng, i + 1))]);
      for (int i = 0; i < kSegments; ++i) {
        const int k = (rng() >> 63) ? mags[static_cast<std::size_t>(i)] : -mags[static_cast<std::size_t>(i)];
        const int plus = (len + k) / 2;
        auto seg = e.begin() + static_cast<std::ptrdiff_t>(i) * len;
        std::fill(seg, seg + plus, std::int8_t{1});
        std::fill(seg + plus, seg + len, std::int8_t{-1});
        for (int j = len - 1; j > 0; --j) std::swap(seg[j], seg[uniform_index(rng, j + 1)]);
      }
    }
    out.emplace_back(n, e);
  }
  return out;
}

GsArray project_to_sums(const GsArray& a, const SegmentSums& target, Rng& rng) {
  if (satisfies_sums(a, target)) return a;
  const SegmentSums k = segment_sums(a);
  const SegmentSums mags = sorted_abs(target);
  std::array<int, kSegments> perm{0, 1, 2, 3};
  SegmentSums best{};
  int best_cost = -1;
  do {
    for (int signs = 0; signs < 16; ++signs) {
      SegmentSums t{};
      int cost = 0;
      for (int i = 0; i < kSegments; ++i) {
        const int m = mags[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        t[static_cast<std::size_t>(i)] = (signs >> i & 1) ? -m : m;
        cost += std::abs(t[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(i)]) / 2;
      }
      if (best_cost < 0 || cost < best_cost) {
        best_cost = cost;
        best = t;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  GsArray out = a;
  const int len = a.segment_length();
  for (int i = 0; i < kSegments; ++i) {
    const int diff = best[static_cast<std::size_t>(i)] - k[static_cast<std::size_t>(i)];
    if (diff == 0) continue;
    // Raising the sum flips -1 entries, lowering it flips +1 entries.
    const std::int8_t from = diff > 0 ? std::int8_t{-1} : std::int8_t{1};
    std::vector<int> where;
    for (int j = 0; j < len; ++j) {
      if (a.at(i, j) == from) where.push_back(j);
    }
    const int flips = std::abs(diff) / 2;
    for (int f = 0; f < flips; ++f) {
      const int pick = f + uniform_index(rng, static_cast<int>(where.size()) - f);
      std::swap(where[static_cast<std::size_t>(f)], where[static_cast<std::size_t>(pick)]);
      out.flip(i, where[static_cast<std::size_t>(f)]);
    }
  }
  return out;
}

namespace {

void select_phase(RunState& state, const GenerationHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig& cfg = state.config;
  const int gen = state.generation;
  const std::uint64_t seed = cfg.seed;
  GenerationStats& st = state.current;
  st = GenerationStats{};
  st.gen = gen;

  std::vector<GsArray> raw;
  if (gen == 0) {
    Rng rng = make_stream({seed, static_cast<std::uint64_t>(gen), kInitTag});
    raw = init_population(cfg, rng);
  } else {
    raw = state.model.sample(cfg.sample_size, cfg.temperature,
                             stream_seed({seed, static_cast<std::uint64_t>(gen), kSampleTag}));
  }
  const auto count = static_cast<std::int64_t>(raw.size());

  std::vector<double> raw_scores(raw.size());
  std::vector<char> raw_hadamard(raw.size(), 0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t c = 0; c < count; ++c) {
    const auto i = static_cast<std::size_t>(c);
    raw_scores[i] = score(raw[i]);
    raw_hadamard[i] = raw_scores[i] < kHadamardScoreThreshold && is_hadamard(raw[i]);
  }
  st.score_sample_mean = finite_mean(raw_scores);
  st.hadamard_ratio_sample =
      static_cast<double>(std::count(raw_hadamard.begin(), raw_hadamard.end(), 1)) / static_cast<double>(count);

  if (cfg.segment_sums) {
    std::int64_t ok = 0;
    for (const GsArray& a : raw) ok += satisfies_sums(a, *cfg.segment_sums);
    st.sum_ratio_sample = static_cast<double>(ok) / static_cast<double>(count);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t c = 0; c < count; ++c) {
      Rng rng = make_stream({seed, static_cast<std::uint64_t>(gen), kProjectTag, static_cast<std::uint64_t>(c)});
      const auto i = static_cast<std::size_t>(c);
      raw[i] = project_to_sums(raw[i], *cfg.segment_sums, rng);
    }
  }

  ImproveResult improved = improve(raw, cfg.num_improve, cfg.improve_config(), state.ladder,
                                   stream_seed({seed, static_cast<std::uint64_t>(gen), kImproveTag}));
  if (cfg.segment_sums) {
    for (const GsArray& a : improved.arrays) {
      if (!satisfies_sums(a, *cfg.segment_sums)) throw std::logic_error("improvement broke the segment sums");
    }
  }

  // Pool: retained population first, then the improved candidates.
  std::vector<Scored> pool(state.population.size() + improved.arrays.size());
  for (std::size_t i = 0; i < state.population.size(); ++i) {
    pool[i] = Scored{state.population[i], state.scores[i], state.scores[i] == 0.0};
  }
  const auto offset = static_cast<std::int64_t>(state.population.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t c = 0; c < count; ++c) {
    pool[static_cast<std::size_t>(offset + c)] = evaluate(improved.arrays[static_cast<std::size_t>(c)]);
  }

  std::unordered_set<std::string> seen;
  std::vector<Scored> unique;
  unique.reserve(pool.size());
  for (Scored& s : pool) {
    if (seen.insert(s.array.key()).second) unique.push_back(std::move(s));
  }
  std::sort(unique.begin(), unique.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.array < b.array;
  });

  std::unordered_set<std::string> archived;
  for (const GsArray& a : state.archive) archived.insert(a.key());
  std::vector<GsArray> found;
  for (const Scored& s : unique) {
    if (s.hadamard && !archived.contains(s.array.key())) found.push_back(s.array);
  }
  state.archive.insert(state.archive.end(), found.begin(), found.end());

  if (unique.size() > static_cast<std::size_t>(cfg.sample_size)) unique.resize(static_cast<std::size_t>(cfg.sample_size));
  const std::size_t keep = std::min(unique.size(), static_cast<std::size_t>(cfg.effective_training_size()));
  state.population.clear();
  state.scores.clear();
  std::size_t selected_hadamard = 0;
  for (std::size_t i = 0; i < keep; ++i) {
    state.population.push_back(unique[i].array);
    state.scores.push_back(unique[i].score);
    selected_hadamard += unique[i].hadamard;
  }
  st.score_selected_mean = finite_mean(state.scores);
  st.hadamard_ratio_selected = static_cast<double>(selected_hadamard) / static_cast<double>(keep);
  st.archive_size = static_cast<std::int64_t>(state.archive.size());
  st.wall_seconds = seconds_since(t0);
  state.pending_train = true;
  if (hooks.before_train) hooks.before_train(state, found);
}

void train_phase(RunState& state, const GenerationHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig& cfg = state.config;
  const int gen = state.generation;
  const TrainReport report = state.model.train(state.population, cfg.train_config(gen),
                                               stream_seed({cfg.seed, static_cast<std::uint64_t>(gen), kTrainTag}));
  GenerationStats st = state.current;
  st.loss_train = report.final_loss;
  st.wall_seconds += seconds_since(t0);
  if (!state.stats.empty() && hooks.warn && st.score_selected_mean > state.stats.back().score_selected_mean) {
    std::ostringstream msg;
    msg << "generation " << gen << ": mean selected score rose from " << state.stats.back().score_selected_mean
        << " to " << st.score_selected_mean;
    hooks.warn(msg.str());
  }
  state.stats.push_back(st);
  state.current = GenerationStats{};
  state.pending_train = false;
  ++state.generation;
  if (hooks.after_generation) hooks.after_generation(state);
}

}  // namespace

void run_generation(RunState& state, const GenerationHooks& hooks) {
  if (state.finished()) throw std::logic_error("the run has already completed every generation");
  if (!state.pending_train) select_phase(state, hooks);
  train_phase(state, hooks);
}

}  // namespace gsh

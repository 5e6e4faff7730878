#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsh/container.hpp"
#include "gsh/gs_array.hpp"
#include "gsh/improve.hpp"
#include "gsh/model.hpp"
#include "gsh/rng.hpp"
#include "gsh/segment_sums.hpp"
#include "gsh/tempering.hpp"

namespace gsh {

struct RunConfig {
  int n = 0;
  int sample_size = 4096;
  /// 0 selects max(1, sample_size / 10).
  int training_size = 0;
  double learning_rate = 3e-4;
  int training_steps = 600;
  double temperature = 1.0;
  int num_improve = 1;
  std::optional<SegmentSums> segment_sums;
  int stacking = 3;
  int n_layer = 4;
  int n_embd = 128;
  int n_head = 4;
  bool transformer_uses_score = false;
  int generations = 10;
  std::uint64_t seed = 0;

  int batch_size = 64;
  /// Resumed training (generation >= 1) runs this fraction of the steps at
  /// learning_rate * resume_lr_factor.
  double resume_fraction = 0.2;
  double resume_lr_factor = 0.5;
  /// -1 selects 10% of training_steps when segment_sums is set, else 0.
  int warmup_steps = -1;
  Precision precision = Precision::f32;
  int ladder_rungs = 4;
  double ladder_t_min = 0.05;
  double ladder_t_max = 0.5;

  int effective_training_size() const;
  int effective_warmup_steps() const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  ModelConfig model_config() const;
  /// Training schedule of generation `gen`: the full run at 0, the reduced
  /// resumed run afterwards.
  TrainConfig train_config(int gen) const;
  ImproveConfig improve_config() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys are rejected. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Parses "k1,k2,k3,k4".
SegmentSums parse_segment_sums(const std::string& text);
std::string format_segment_sums(const SegmentSums& k);

/// Sorted |k| equals sorted |target|.
bool satisfies_sums(const GsArray& a, const SegmentSums& target);

struct GenerationStats {
  int gen = 0;
  double wall_seconds = 0.0;
  double loss_train = 0.0;
  /// Means over the finite scores of the raw (pre-improvement) candidates
  /// and of the selected training set.
  double score_sample_mean = 0.0;
  double score_selected_mean = 0.0;
  double hadamard_ratio_sample = 0.0;
  double hadamard_ratio_selected = 0.0;
  std::int64_t archive_size = 0;
  /// Fraction of raw candidates that already satisfy the segment sums
  /// (segment_sums mode only).
  std::optional<double> sum_ratio_sample;
};

nlohmann::json to_json(const GenerationStats& s);
GenerationStats generation_stats_from_json(const nlohmann::json& j);
std::string stats_csv_header();
/// Deterministic columns only; wall_seconds is left out.
std::string stats_csv_row(const GenerationStats& s);

struct RunState {
  RunConfig config;
  /// Generation currently being run, or the next one.
  int generation = 0;
  /// Selection is done for `generation` and its training has not run yet.
  bool pending_train = false;
  /// Canonical forms sorted by (score, key); also the training set.
  std::vector<GsArray> population;
  std::vector<double> scores;
  /// Verified Hadamard canonical forms in order of discovery.
  std::vector<GsArray> archive;
  Model model;
  TemperatureLadder ladder;
  std::vector<GenerationStats> stats;
  /// Stats of the generation in progress (valid while pending_train).
  GenerationStats current;

  bool finished() const { return !pending_train && generation >= config.generations; }
};

/// Fresh state: untrained model and the initial ladder.
RunState start_run(const RunConfig& config);

/// sample_size i.i.d. uniform arrays, or with segment sums fixed, each
/// segment uniform among arrangements of its sum (magnitudes assigned to
/// segments in random order with random signs).
std::vector<GsArray> init_population(const RunConfig& config, Rng& rng);

/// Flips the fewest entries needed to reach the target sums (over the
/// assignments of magnitudes and signs to segments), picking which entries
/// uniformly. Arrays already satisfying the sums are unchanged.
GsArray project_to_sums(const GsArray& a, const SegmentSums& target, Rng& rng);

/// Exact check used for every archive entry.
bool is_hadamard(const GsArray& a);

struct GenerationHooks {
  /// After selection, before training; `found` lists the archive entries
  /// added by this generation.
  std::function<void(const RunState&, std::span<const GsArray> found)> before_train;
  /// After the statistics row is appended.
  std::function<void(const RunState&)> after_generation;
  std::function<void(const std::string&)> warn;
};

/// Runs one generation, or finishes the pending one after a restore.
/// Throws std::logic_error on a finished state.
void run_generation(RunState& state, const GenerationHooks& hooks = {});

/// Checkpoint container: loop state in the manifest, population, archive,
/// scores and model tensors as blobs.
Container checkpoint_container(const RunState& state);
RunState restore_state(const Container& c);
void save_checkpoint(const RunState& state, const std::filesystem::path& path);
/// Throws ContainerError for corrupt or incompatible files.
RunState load_checkpoint(const std::filesystem::path& path);

/// Output directory: archive.txt, stats.csv, stats.jsonl and
/// checkpoints/gen-NNN.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path checkpoint_path(int gen) const;
  /// Most recent checkpoint, if any.
  std::optional<std::filesystem::path> latest_checkpoint() const;

  /// Rewrites archive and statistics from a state (after a restore).
  void sync(const RunState& state) const;
  void append_archive(std::span<const GsArray> found) const;
  void write_stats(std::span<const GenerationStats> rows) const;

 private:
  std::filesystem::path root_;
};

/// Runs `state` to completion, writing outputs and checkpoints to `dir`.
/// The directory is first synced to the state, so a restored run rewrites
/// any output left behind by generations after its checkpoint.
void run_loop(RunState& state, const RunDirectory& dir,
              const std::function<void(const std::string&)>& log = {});

}  // namespace gsh

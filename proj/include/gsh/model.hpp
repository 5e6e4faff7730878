#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gsh/container.hpp"
#include "gsh/gs_array.hpp"
#include "gsh/tokenizer.hpp"
#include "gsh/transformer.hpp"

namespace gsh {

enum class Precision { f32, f64 };

/// Frequency bands and quantization levels of the residual-spectrum summary
/// injected before each segment in score-conditioned mode.
inline constexpr int kSummaryBands = 8;
inline constexpr int kSummaryLevels = 8;
/// Sequences decoded together during sampling.
inline constexpr int kSampleChunk = 256;

struct ModelConfig {
  int n = 0;
  int stacking = 3;
  int n_layer = 4;
  int n_embd = 128;
  int n_head = 4;
  bool uses_score = false;
  Precision precision = Precision::f32;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Bits per generated sequence: n, or n' in conditioned mode.
  int sequence_bits() const { return uses_score ? n / 4 : n; }
  int sequence_tokens() const { return Tokenizer(stacking, sequence_bits()).tokens(); }
  /// Positions fed to the network: the begin token plus all but the last
  /// stack, or segment id + summary + all but the last stack.
  int context_length() const { return sequence_tokens() + (uses_score ? kSummaryBands : 0); }
  int vocab_in() const { return (1 << stacking) + 1 + (uses_score ? kSummaryLevels + kSegments : 0); }
  int vocab_out() const { return 1 << stacking; }
  TransformerShape shape() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct TrainConfig {
  int steps = 1000;
  int batch_size = 64;
  double learning_rate = 3e-4;
  /// Linear warmup from 0; 0 disables.
  int warmup_steps = 0;
  AdamWConfig adamw;
  /// Apply an independent random element of H to every example.
  bool augment = true;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainReport {
  std::vector<double> losses;
  /// Mean loss over the last tenth of the steps.
  double final_loss = 0.0;
};

/// A batch of next-token examples laid out row-major.
struct TokenBatch {
  std::vector<int> inputs;
  std::vector<TokenTarget> targets;
  int batch = 0;
  int length = 0;
};

/// (1/n) sum_{i < segments} |lambda_{i,j}|^2 per frequency.
std::vector<double> partial_power(const GsArray& a, int segments);

/// Quantized band averages of r_j = max(0, target_j - partial_j): bands
/// split [0, n') evenly (a band narrower than one frequency takes the
/// nearest), level = min(7, floor(4 * mean)) over the grid [0, 2).
std::array<int, kSummaryBands> residual_summary(std::span<const double> target,
                                                std::span<const double> partial);

class Model {
 public:
  Model() = default;
  /// Fresh weights drawn from `seed`.
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const TrainConfig& last_train_config() const { return train_config_; }
  std::int64_t optimizer_step() const;
  std::size_t parameter_count() const;

  /// Example sequence for one array: the whole array, or in conditioned mode
  /// segment `segment` with its training-time summary (target = the
  /// array's own full spectrum).
  void append_example(TokenBatch& batch, const GsArray& a, int segment = 0) const;
  TokenBatch make_batch(std::span<const GsArray> arrays) const;

  double loss(const TokenBatch& batch) const;
  double loss_and_grad(const TokenBatch& batch);

  /// AdamW training. Step t draws its batch (uniform with replacement,
  /// augmented, uniform segment in conditioned mode) from stream
  /// (seed, t). Throws std::runtime_error on a non-finite loss.
  TrainReport train(std::span<const GsArray> data, const TrainConfig& config, std::uint64_t seed);

  /// Autoregressive sampling. Logits are divided by the temperature;
  /// temperature <= 0 decodes greedily (lowest id wins ties). A final stack
  /// with padding is drawn from the marginal over its real bits. Sequence c
  /// uses stream (seed, c), so results do not depend on thread count.
  std::vector<GsArray> sample(int count, double temperature, std::uint64_t seed) const;

  /// Conditioned mode: segments one after another, each preceded by its
  /// segment id and the summary of r_j = max(0, 1 - P_j^partial).
  std::vector<GsArray> conditioned_sample(int count, double temperature, std::uint64_t seed) const;

  /// Logits of one batch as doubles, (batch * length) x vocab_out row-major.
  std::vector<double> logits(std::span<const int> inputs, int batch, int length) const;

  /// Serialization: manifest fragment plus raw tensors under `prefix`.
  nlohmann::json manifest() const;
  std::vector<Blob> blobs(const std::string& prefix = "model.") const;
  static Model from_container(const nlohmann::json& manifest, const Container& c,
                              const std::string& prefix = "model.");
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  Transformer<float>* f32() { return std::get_if<Transformer<float>>(&net_); }
  Transformer<double>* f64() { return std::get_if<Transformer<double>>(&net_); }

 private:
  ModelConfig config_;
  TrainConfig train_config_;
  std::variant<Transformer<float>, Transformer<double>> net_;
};

}  // namespace gsh

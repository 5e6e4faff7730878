#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsh/rng.hpp"

namespace gsh {

struct TransformerShape {
  int vocab_in = 0;   // input ids, including begin and conditioning tokens
  int vocab_out = 0;  // predicted ids
  int context = 0;    // maximum positions
  int n_layer = 4;
  int n_embd = 128;
  int n_head = 4;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Next-token target: the loss is -log of the total probability of ids in
/// [lo, hi). hi <= lo marks a position that does not contribute.
struct TokenTarget {
  int lo = 0;
  int hi = 0;
};

struct AdamWConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  /// Global gradient-norm clip; <= 0 disables.
  double grad_clip = 1.0;
};

/// AdamW on one tensor: m, v updated with the (already clipped) gradient,
/// p <- p - lr * weight_decay * p - lr * m_hat / (sqrt(v_hat) + eps), where
/// `step` is the 1-based step used for bias correction.
template <class T>
void adamw_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                  std::int64_t step, double learning_rate, double weight_decay, double grad_scale,
                  const AdamWConfig& config);

/// Decoder-only transformer: learned token and position embeddings,
/// pre-norm blocks of causal multi-head attention and a 4x tanh-GELU MLP,
/// final LayerNorm and an untied output head. Parameters, gradients and
/// AdamW moments live in flat buffers.
template <class T>
class Transformer {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  /// Over-aligned storage: vectorized reductions over mapped tensors then
  /// peel identically for every allocation, which keeps results bit-stable.
  using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

  struct Tensor {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
    bool decay;  // weight decay applies to matrices only
  };

  /// Incremental decoding state for a fixed batch of sequences.
  struct DecodeCache {
    int batch = 0;
    int length = 0;
    std::vector<Mat> keys, values;  // per layer, (batch * context) x n_embd
  };

  Transformer() = default;
  explicit Transformer(const TransformerShape& shape);

  const TransformerShape& shape() const { return shape_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t parameter_count() const { return params_.size(); }

  /// N(0, 0.02) matrices (residual projections scaled by 1/sqrt(2 n_layer)),
  /// zero biases, unit LayerNorm gains. Resets the optimizer.
  void initialize(Rng& rng);

  Buffer& params() { return params_; }
  const Buffer& params() const { return params_; }
  const Buffer& grads() const { return grads_; }
  Buffer& adam_m() { return m_; }
  Buffer& adam_v() { return v_; }
  const Buffer& adam_m() const { return m_; }
  const Buffer& adam_v() const { return v_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  /// Logits for a batch of `batch` sequences of `length` ids laid out
  /// row-major; returns (batch * length) x vocab_out.
  Mat logits(std::span<const int> inputs, int batch, int length) const;

  /// Mean loss over contributing targets; no gradient.
  double loss(std::span<const int> inputs, std::span<const TokenTarget> targets, int batch,
              int length) const;

  /// Mean loss; overwrites grads() with its gradient.
  double loss_and_grad(std::span<const int> inputs, std::span<const TokenTarget> targets,
                       int batch, int length);

  /// One AdamW update from grads() (clipped, bias corrected). Returns the
  /// pre-clip gradient norm.
  double adamw_step(const AdamWConfig& config, double learning_rate);

  DecodeCache start_decode(int batch) const;
  /// Feeds one id per sequence at position cache.length and returns the
  /// batch x vocab_out logits for that position.
  Mat decode(DecodeCache& cache, std::span<const int> ids) const;

 private:
  struct Forward;
  double run(std::span<const int> inputs, std::span<const TokenTarget> targets, int batch,
             int length, bool backward, Mat* logits_out) const;

  TransformerShape shape_;
  std::vector<Tensor> tensors_;
  Buffer params_;
  mutable Buffer grads_;
  Buffer m_, v_;
  std::int64_t step_ = 0;

  // Offsets of each parameter tensor.
  struct LayerOffsets {
    std::size_t ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };
  std::size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_ = 0;
  std::vector<LayerOffsets> layers_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace gsh

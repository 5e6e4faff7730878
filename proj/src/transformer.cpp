#include "gsh/transformer.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace gsh {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ColT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using RowArr = Eigen::Array<T, 1, Eigen::Dynamic>;

template <class T>
T gelu(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  return T(0.5) * u * (T(1) + std::tanh(c * (u + T(0.044715) * u * u * u)));
}

template <class T>
T gelu_grad(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T t = std::tanh(c * (u + T(0.044715) * u * u * u));
  return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * u * u);
}

template <class T>
void layer_norm(const MatT<T>& x, const T* gain, const T* bias, MatT<T>& xhat, ColT<T>& rstd,
                MatT<T>& out) {
  const auto rows = x.rows(), d = x.cols();
  xhat.resize(rows, d);
  rstd.resize(rows);
  out.resize(rows, d);
  Eigen::Map<const RowArr<T>> g(gain, d), b(bias, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).mean();
    const RowArr<T> centered = x.row(r).array() - mean;
    const T var = centered.square().mean();
    rstd(r) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    xhat.row(r) = centered * rstd(r);
    out.row(r) = xhat.row(r).array() * g + b;
  }
}

// Accumulates into dx, dgain and dbias.
template <class T>
void layer_norm_backward(const MatT<T>& dout, const MatT<T>& xhat, const ColT<T>& rstd,
                         const T* gain, T* dgain, T* dbias, MatT<T>& dx) {
  const auto d = dout.cols();
  Eigen::Map<const RowArr<T>> g(gain, d);
  Eigen::Map<RowArr<T>> dg(dgain, d), db(dbias, d);
  for (Eigen::Index r = 0; r < dout.rows(); ++r) {
    const RowArr<T> dxhat = dout.row(r).array() * g;
    dg += dout.row(r).array() * xhat.row(r).array();
    db += dout.row(r).array();
    const T mean1 = dxhat.mean();
    const T mean2 = (dxhat * xhat.row(r).array()).mean();
    dx.row(r).array() += rstd(r) * (dxhat - mean1 - xhat.row(r).array() * mean2);
  }
}

// Causal softmax of the rows of s in place.
template <class T>
void causal_softmax(MatT<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    T m = s(i, 0);
    for (Eigen::Index j = 1; j <= i; ++j) m = std::max(m, s(i, j));
    T total = 0;
    for (Eigen::Index j = 0; j <= i; ++j) {
      s(i, j) = std::exp(s(i, j) - m);
      total += s(i, j);
    }
    for (Eigen::Index j = 0; j <= i; ++j) s(i, j) /= total;
    for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = 0;
  }
}

}  // namespace

void TransformerShape::validate() const {
  auto need = [](bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
  };
  need(vocab_in > 0, "vocab_in", "must be positive");
  need(vocab_out > 0, "vocab_out", "must be positive");
  need(context > 0, "context_length", "must be positive");
  need(n_layer > 0, "n_layer", "must be positive");
  need(n_embd > 0, "n_embd", "must be positive");
  need(n_head > 0, "n_head", "must be positive");
  need(n_embd % n_head == 0, "n_embd", "must be divisible by n_head");
}

template <class T>
struct Transformer<T>::Forward {
  struct Layer {
    Mat x_in, xhat1, h1, qkv, att, y, x_mid, xhat2, h2, u, g;
    ColT<T> rstd1, rstd2;
  };
  std::vector<Layer> layers;
  Mat xhatf, hf;
  ColT<T> rstdf;
};

template <class T>
Transformer<T>::Transformer(const TransformerShape& shape) : shape_(shape) {
  shape_.validate();
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols, bool decay) {
    tensors_.push_back({std::move(name), offset, rows, cols, decay});
    const std::size_t at = offset;
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    return at;
  };
  const int d = shape_.n_embd;
  wte_ = add("wte", shape_.vocab_in, d, true);
  wpe_ = add("wpe", shape_.context, d, true);
  for (int l = 0; l < shape_.n_layer; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    LayerOffsets o{};
    o.ln1_g = add(p + "ln1.g", 1, d, false);
    o.ln1_b = add(p + "ln1.b", 1, d, false);
    o.w_qkv = add(p + "attn.w_qkv", d, 3 * d, true);
    o.b_qkv = add(p + "attn.b_qkv", 1, 3 * d, false);
    o.w_o = add(p + "attn.w_o", d, d, true);
    o.b_o = add(p + "attn.b_o", 1, d, false);
    o.ln2_g = add(p + "ln2.g", 1, d, false);
    o.ln2_b = add(p + "ln2.b", 1, d, false);
    o.w_fc = add(p + "mlp.w_fc", d, 4 * d, true);
    o.b_fc = add(p + "mlp.b_fc", 1, 4 * d, false);
    o.w_proj = add(p + "mlp.w_proj", 4 * d, d, true);
    o.b_proj = add(p + "mlp.b_proj", 1, d, false);
    layers_.push_back(o);
  }
  lnf_g_ = add("ln_f.g", 1, d, false);
  lnf_b_ = add("ln_f.b", 1, d, false);
  head_ = add("lm_head", d, shape_.vocab_out, true);
  params_.assign(offset, T(0));
  grads_.assign(offset, T(0));
  m_.assign(offset, T(0));
  v_.assign(offset, T(0));
}

template <class T>
void Transformer<T>::initialize(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double proj_std = 0.02 / std::sqrt(2.0 * shape_.n_layer);
  for (const Tensor& t : tensors_) {
    const std::size_t size = static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols);
    T* p = params_.data() + t.offset;
    const bool gain = t.name.ends_with(".g");
    if (!t.decay) {
      std::fill(p, p + size, gain ? T(1) : T(0));
      continue;
    }
    const bool projection = t.name.ends_with("w_o") || t.name.ends_with("w_proj");
    const double sd = projection ? proj_std : 0.02;
    for (std::size_t i = 0; i < size; ++i) p[i] = static_cast<T>(sd * normal(rng));
  }
  std::fill(m_.begin(), m_.end(), T(0));
  std::fill(v_.begin(), v_.end(), T(0));
  step_ = 0;
}

template <class T>
double Transformer<T>::run(std::span<const int> inputs, std::span<const TokenTarget> targets,
                           int batch, int length, bool backward, Mat* logits_out) const {
  const TransformerShape& s = shape_;
  if (batch <= 0 || length <= 0) throw std::invalid_argument("empty batch");
  if (length > s.context) throw std::invalid_argument("input longer than the context length");
  const auto rows = static_cast<Eigen::Index>(batch) * length;
  if (static_cast<Eigen::Index>(inputs.size()) != rows) throw std::invalid_argument("input size mismatch");
  if (!targets.empty() && targets.size() != inputs.size()) throw std::invalid_argument("target size mismatch");
  for (int id : inputs) {
    if (id < 0 || id >= s.vocab_in) throw std::invalid_argument("token id out of range");
  }

  const int d = s.n_embd, heads = s.n_head, hd = d / heads;
  const T* P = params_.data();
  auto cmat = [&](std::size_t off, int r, int c) { return Eigen::Map<const Mat>(P + off, r, c); };
  auto crow = [&](std::size_t off, int c) { return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(P + off, c); };

  Forward f;
  f.layers.resize(static_cast<std::size_t>(s.n_layer));
  Mat x(rows, d);
  const auto wte = cmat(wte_, s.vocab_in, d);
  const auto wpe = cmat(wpe_, s.context, d);
  for (Eigen::Index r = 0; r < rows; ++r) x.row(r) = wte.row(inputs[static_cast<std::size_t>(r)]) + wpe.row(r % length);

  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  for (int l = 0; l < s.n_layer; ++l) {
    auto& c = f.layers[static_cast<std::size_t>(l)];
    const LayerOffsets& o = layers_[static_cast<std::size_t>(l)];
    c.x_in = x;
    layer_norm<T>(x, P + o.ln1_g, P + o.ln1_b, c.xhat1, c.rstd1, c.h1);
    c.qkv = c.h1 * cmat(o.w_qkv, d, 3 * d);
    c.qkv.rowwise() += crow(o.b_qkv, 3 * d);
    c.att.resize(static_cast<Eigen::Index>(batch) * heads * length, length);
    c.y.resize(rows, d);
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const auto q = c.qkv.block(b * length, h * hd, length, hd);
        const auto k = c.qkv.block(b * length, d + h * hd, length, hd);
        const auto v = c.qkv.block(b * length, 2 * d + h * hd, length, hd);
        Mat a = (q * k.transpose()) * scale;
        causal_softmax<T>(a);
        c.y.block(b * length, h * hd, length, hd) = a * v;
        c.att.block((static_cast<Eigen::Index>(b) * heads + h) * length, 0, length, length) = a;
      }
    }
    x += c.y * cmat(o.w_o, d, d);
    x.rowwise() += crow(o.b_o, d);
    c.x_mid = x;
    layer_norm<T>(x, P + o.ln2_g, P + o.ln2_b, c.xhat2, c.rstd2, c.h2);
    c.u = c.h2 * cmat(o.w_fc, d, 4 * d);
    c.u.rowwise() += crow(o.b_fc, 4 * d);
    c.g = c.u.unaryExpr([](T u) { return gelu(u); });
    x += c.g * cmat(o.w_proj, 4 * d, d);
    x.rowwise() += crow(o.b_proj, d);
  }
  layer_norm<T>(x, P + lnf_g_, P + lnf_b_, f.xhatf, f.rstdf, f.hf);
  Mat logits = f.hf * cmat(head_, d, s.vocab_out);
  if (logits_out != nullptr) *logits_out = logits;
  if (targets.empty()) return 0.0;

  std::size_t count = 0;
  for (const TokenTarget& t : targets) {
    if (t.hi > t.lo) {
      if (t.lo < 0 || t.hi > s.vocab_out) throw std::invalid_argument("target id out of range");
      ++count;
    }
  }
  if (backward) std::fill(grads_.begin(), grads_.end(), T(0));
  if (count == 0) return 0.0;

  Mat dlogits;
  if (backward) dlogits = Mat::Zero(rows, s.vocab_out);
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const TokenTarget& t = targets[static_cast<std::size_t>(r)];
    if (t.hi <= t.lo) continue;
    const double m = static_cast<double>(logits.row(r).maxCoeff());
    double all = 0.0, hit = 0.0;
    for (int v = 0; v < s.vocab_out; ++v) {
      const double e = std::exp(static_cast<double>(logits(r, v)) - m);
      all += e;
      if (v >= t.lo && v < t.hi) hit += e;
    }
    total -= std::log(hit) - std::log(all);
    if (backward) {
      for (int v = 0; v < s.vocab_out; ++v) {
        const double p = std::exp(static_cast<double>(logits(r, v)) - m) / all;
        const double in = (v >= t.lo && v < t.hi) ? p * all / hit : 0.0;
        dlogits(r, v) = static_cast<T>((p - in) / static_cast<double>(count));
      }
    }
  }
  const double mean_loss = total / static_cast<double>(count);
  if (!backward) return mean_loss;

  T* G = grads_.data();
  auto gmat = [&](std::size_t off, int r, int c) { return Eigen::Map<Mat>(G + off, r, c); };
  auto grow = [&](std::size_t off, int c) { return Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(G + off, c); };

  gmat(head_, d, s.vocab_out).noalias() += f.hf.transpose() * dlogits;
  const Mat dhf = dlogits * cmat(head_, d, s.vocab_out).transpose();
  Mat dx = Mat::Zero(rows, d);
  layer_norm_backward<T>(dhf, f.xhatf, f.rstdf, P + lnf_g_, G + lnf_g_, G + lnf_b_, dx);

  for (int l = s.n_layer - 1; l >= 0; --l) {
    const auto& c = f.layers[static_cast<std::size_t>(l)];
    const LayerOffsets& o = layers_[static_cast<std::size_t>(l)];
    // MLP branch.
    gmat(o.w_proj, 4 * d, d).noalias() += c.g.transpose() * dx;
    grow(o.b_proj, d) += dx.colwise().sum();
    const Mat dg = dx * cmat(o.w_proj, 4 * d, d).transpose();
    const Mat du = (dg.array() * c.u.unaryExpr([](T u) { return gelu_grad(u); }).array()).matrix();
    gmat(o.w_fc, d, 4 * d).noalias() += c.h2.transpose() * du;
    grow(o.b_fc, 4 * d) += du.colwise().sum();
    const Mat dh2 = du * cmat(o.w_fc, d, 4 * d).transpose();
    layer_norm_backward<T>(dh2, c.xhat2, c.rstd2, P + o.ln2_g, G + o.ln2_g, G + o.ln2_b, dx);

    // Attention branch.
    gmat(o.w_o, d, d).noalias() += c.y.transpose() * dx;
    grow(o.b_o, d) += dx.colwise().sum();
    const Mat dy = dx * cmat(o.w_o, d, d).transpose();
    Mat dqkv = Mat::Zero(rows, 3 * d);
    for (int b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const auto a = c.att.block((static_cast<Eigen::Index>(b) * heads + h) * length, 0, length, length);
        const auto q = c.qkv.block(b * length, h * hd, length, hd);
        const auto k = c.qkv.block(b * length, d + h * hd, length, hd);
        const auto v = c.qkv.block(b * length, 2 * d + h * hd, length, hd);
        const auto dyh = dy.block(b * length, h * hd, length, hd);
        const Mat da = dyh * v.transpose();
        dqkv.block(b * length, 2 * d + h * hd, length, hd) = a.transpose() * dyh;
        const ColT<T> inner = (da.array() * a.array()).rowwise().sum();
        const Mat ds = ((da.array().colwise() - inner.array()) * a.array() * scale).matrix();
        dqkv.block(b * length, h * hd, length, hd) = ds * k;
        dqkv.block(b * length, d + h * hd, length, hd) = ds.transpose() * q;
      }
    }
    gmat(o.w_qkv, d, 3 * d).noalias() += c.h1.transpose() * dqkv;
    grow(o.b_qkv, 3 * d) += dqkv.colwise().sum();
    const Mat dh1 = dqkv * cmat(o.w_qkv, d, 3 * d).transpose();
    layer_norm_backward<T>(dh1, c.xhat1, c.rstd1, P + o.ln1_g, G + o.ln1_g, G + o.ln1_b, dx);
  }

  auto gwte = gmat(wte_, s.vocab_in, d);
  auto gwpe = gmat(wpe_, s.context, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    gwte.row(inputs[static_cast<std::size_t>(r)]) += dx.row(r);
    gwpe.row(r % length) += dx.row(r);
  }
  return mean_loss;
}

template <class T>
typename Transformer<T>::Mat Transformer<T>::logits(std::span<const int> inputs, int batch,
                                                    int length) const {
  Mat out;
  run(inputs, {}, batch, length, false, &out);
  return out;
}

template <class T>
double Transformer<T>::loss(std::span<const int> inputs, std::span<const TokenTarget> targets,
                            int batch, int length) const {
  if (targets.size() != inputs.size()) throw std::invalid_argument("target size mismatch");
  return run(inputs, targets, batch, length, false, nullptr);
}

template <class T>
double Transformer<T>::loss_and_grad(std::span<const int> inputs,
                                     std::span<const TokenTarget> targets, int batch, int length) {
  if (targets.size() != inputs.size()) throw std::invalid_argument("target size mismatch");
  return run(inputs, targets, batch, length, true, nullptr);
}

template <class T>
void adamw_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
                  std::int64_t step, double learning_rate, double weight_decay, double grad_scale,
                  const AdamWConfig& config) {
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]) * grad_scale;
    const double mi = config.beta1 * static_cast<double>(m[i]) + (1.0 - config.beta1) * g;
    const double vi = config.beta2 * static_cast<double>(v[i]) + (1.0 - config.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    double p = static_cast<double>(params[i]);
    p -= learning_rate * weight_decay * p;
    p -= learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + config.eps);
    params[i] = static_cast<T>(p);
  }
}

template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                  std::int64_t, double, double, double, const AdamWConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   std::span<double>, std::int64_t, double, double, double, const AdamWConfig&);

template <class T>
double Transformer<T>::adamw_step(const AdamWConfig& config, double learning_rate) {
  double norm2 = 0.0;
  for (T g : grads_) norm2 += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(norm2);
  const double clip = config.grad_clip > 0.0 && norm > config.grad_clip ? config.grad_clip / norm : 1.0;
  ++step_;
  for (const Tensor& t : tensors_) {
    const std::size_t size = static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols);
    adamw_update<T>(std::span<T>(params_).subspan(t.offset, size),
                    std::span<const T>(grads_).subspan(t.offset, size),
                    std::span<T>(m_).subspan(t.offset, size), std::span<T>(v_).subspan(t.offset, size), step_,
                    learning_rate, t.decay ? config.weight_decay : 0.0, clip, config);
  }
  return norm;
}

template <class T>
typename Transformer<T>::DecodeCache Transformer<T>::start_decode(int batch) const {
  if (batch <= 0) throw std::invalid_argument("empty batch");
  DecodeCache cache;
  cache.batch = batch;
  const Eigen::Index rows = static_cast<Eigen::Index>(batch) * shape_.context;
  for (int l = 0; l < shape_.n_layer; ++l) {
    cache.keys.emplace_back(rows, shape_.n_embd);
    cache.values.emplace_back(rows, shape_.n_embd);
  }
  return cache;
}

template <class T>
typename Transformer<T>::Mat Transformer<T>::decode(DecodeCache& cache, std::span<const int> ids) const {
  const TransformerShape& s = shape_;
  const int batch = cache.batch, pos = cache.length;
  if (static_cast<int>(ids.size()) != batch) throw std::invalid_argument("decode batch mismatch");
  if (pos >= s.context) throw std::invalid_argument("decode past the context length");
  const int d = s.n_embd, heads = s.n_head, hd = d / heads;
  const T* P = params_.data();
  auto cmat = [&](std::size_t off, int r, int c) { return Eigen::Map<const Mat>(P + off, r, c); };
  auto crow = [&](std::size_t off, int c) { return Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(P + off, c); };

  Mat x(batch, d);
  const auto wte = cmat(wte_, s.vocab_in, d);
  const auto wpe = cmat(wpe_, s.context, d);
  for (int b = 0; b < batch; ++b) {
    const int id = ids[static_cast<std::size_t>(b)];
    if (id < 0 || id >= s.vocab_in) throw std::invalid_argument("token id out of range");
    x.row(b) = wte.row(id) + wpe.row(pos);
  }
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Mat xhat, h, qkv, y(batch, d), u;
  ColT<T> rstd;
  for (int l = 0; l < s.n_layer; ++l) {
    const LayerOffsets& o = layers_[static_cast<std::size_t>(l)];
    Mat& keys = cache.keys[static_cast<std::size_t>(l)];
    Mat& values = cache.values[static_cast<std::size_t>(l)];
    layer_norm<T>(x, P + o.ln1_g, P + o.ln1_b, xhat, rstd, h);
    qkv = h * cmat(o.w_qkv, d, 3 * d);
    qkv.rowwise() += crow(o.b_qkv, 3 * d);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * s.context;
      keys.row(base + pos) = qkv.block(b, d, 1, d);
      values.row(base + pos) = qkv.block(b, 2 * d, 1, d);
      for (int hh = 0; hh < heads; ++hh) {
        const auto q = qkv.block(b, hh * hd, 1, hd);
        const auto k = keys.block(base, hh * hd, pos + 1, hd);
        const auto v = values.block(base, hh * hd, pos + 1, hd);
        Eigen::Matrix<T, 1, Eigen::Dynamic> w = (q * k.transpose()) * scale;
        const T m = w.maxCoeff();
        w = (w.array() - m).exp().matrix();
        w /= w.sum();
        y.block(b, hh * hd, 1, hd) = w * v;
      }
    }
    x += y * cmat(o.w_o, d, d);
    x.rowwise() += crow(o.b_o, d);
    layer_norm<T>(x, P + o.ln2_g, P + o.ln2_b, xhat, rstd, h);
    u = h * cmat(o.w_fc, d, 4 * d);
    u.rowwise() += crow(o.b_fc, 4 * d);
    u = u.unaryExpr([](T e) { return gelu(e); });
    x += u * cmat(o.w_proj, 4 * d, d);
    x.rowwise() += crow(o.b_proj, d);
  }
  layer_norm<T>(x, P + lnf_g_, P + lnf_b_, xhat, rstd, h);
  ++cache.length;
  return h * cmat(head_, d, s.vocab_out);
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace gsh

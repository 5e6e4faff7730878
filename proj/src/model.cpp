#include "gsh/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gsh/dft.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"

namespace gsh {

namespace {

int bos_id(int stacking) { return 1 << stacking; }
int level_id(int stacking, int level) { return (1 << stacking) + 1 + level; }
int segment_id(int stacking, int segment) { return (1 << stacking) + 1 + kSummaryLevels + segment; }

// |lambda_{i,j}|^2 / n accumulated over the given segments of raw entries.
void add_power(std::span<const std::int8_t> segment, int n, std::vector<double>& power) {
  const std::size_t len = segment.size();
  std::vector<cplx> in(len), out(len);
  for (std::size_t k = 0; k < len; ++k) in[k] = cplx(segment[k], 0.0);
  dft_plan(len).forward(in, out);
  for (std::size_t j = 0; j < len; ++j) power[j] += std::norm(out[j]) / n;
}

// Draws stack t from one row of logits. Padding bits of the last stack are
// marginalized out and returned as zero.
int draw_token(const double* z, const Tokenizer& tok, int t, double temperature, Rng& rng) {
  const int vocab = tok.vocabulary();
  const int pad = tok.stacking() - tok.real_bits(t);
  if (!(temperature > 0.0)) {
    const int best = static_cast<int>(std::max_element(z, z + vocab) - z);
    return (best >> pad) << pad;
  }
  const double m = *std::max_element(z, z + vocab);
  const int groups = vocab >> pad;
  std::vector<double> weight(static_cast<std::size_t>(groups), 0.0);
  double total = 0.0;
  for (int v = 0; v < vocab; ++v) {
    const double w = std::exp((z[v] - m) / temperature);
    weight[static_cast<std::size_t>(v >> pad)] += w;
    total += w;
  }
  double u = uniform01(rng) * total;
  int g = 0;
  for (; g + 1 < groups; ++g) {
    u -= weight[static_cast<std::size_t>(g)];
    if (u < 0.0) break;
  }
  return g << pad;
}

template <class Net>
std::vector<double> logits_row_major(const Net& net, std::span<const int> inputs, int batch, int length) {
  const auto m = net.logits(inputs, batch, length);
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<double>(m(r, c));
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  auto need = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
  };
  need(n >= 4 && n % 4 == 0, "n", "must be a positive multiple of 4");
  need(stacking >= 1 && stacking <= Tokenizer::kMaxStacking, "stacking", "must be in [1, 12]");
  need(n_layer > 0, "n_layer", "must be positive");
  need(n_embd > 0, "n_embd", "must be positive");
  need(n_head > 0, "n_head", "must be positive");
  need(n_embd % n_head == 0, "n_embd", "must be divisible by n_head");
}

TransformerShape ModelConfig::shape() const {
  validate();
  TransformerShape s;
  s.vocab_in = vocab_in();
  s.vocab_out = vocab_out();
  s.context = context_length();
  s.n_layer = n_layer;
  s.n_embd = n_embd;
  s.n_head = n_head;
  return s;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n", c.n},           {"stacking", c.stacking},     {"n_layer", c.n_layer},
          {"n_embd", c.n_embd}, {"n_head", c.n_head},         {"uses_score", c.uses_score},
          {"precision", c.precision == Precision::f32 ? "f32" : "f64"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n = j.at("n").get<int>();
  c.stacking = j.at("stacking").get<int>();
  c.n_layer = j.at("n_layer").get<int>();
  c.n_embd = j.at("n_embd").get<int>();
  c.n_head = j.at("n_head").get<int>();
  c.uses_score = j.at("uses_score").get<bool>();
  const auto p = j.at("precision").get<std::string>();
  if (p != "f32" && p != "f64") throw std::invalid_argument("precision: unknown value " + p);
  c.precision = p == "f32" ? Precision::f32 : Precision::f64;
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"beta1", c.adamw.beta1},
          {"beta2", c.adamw.beta2},
          {"eps", c.adamw.eps},
          {"weight_decay", c.adamw.weight_decay},
          {"grad_clip", c.adamw.grad_clip},
          {"augment", c.augment}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.at("steps").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<int>();
  c.adamw.beta1 = j.at("beta1").get<double>();
  c.adamw.beta2 = j.at("beta2").get<double>();
  c.adamw.eps = j.at("eps").get<double>();
  c.adamw.weight_decay = j.at("weight_decay").get<double>();
  c.adamw.grad_clip = j.at("grad_clip").get<double>();
  c.augment = j.at("augment").get<bool>();
  return c;
}

std::vector<double> partial_power(const GsArray& a, int segments) {
  std::vector<double> p(static_cast<std::size_t>(a.segment_length()), 0.0);
  for (int i = 0; i < segments; ++i) add_power(a.segment(i), a.order(), p);
  return p;
}

std::array<int, kSummaryBands> residual_summary(std::span<const double> target,
                                                std::span<const double> partial) {
  if (target.size() != partial.size() || target.empty()) throw std::invalid_argument("summary length mismatch");
  const auto len = static_cast<int>(target.size());
  std::array<int, kSummaryBands> levels{};
  for (int b = 0; b < kSummaryBands; ++b) {
    const int lo = std::min(len - 1, b * len / kSummaryBands);
    const int hi = std::max(lo + 1, (b + 1) * len / kSummaryBands);
    double mean = 0.0;
    for (int j = lo; j < hi; ++j) {
      mean += std::max(0.0, target[static_cast<std::size_t>(j)] - partial[static_cast<std::size_t>(j)]);
    }
    mean /= hi - lo;
    // The small offset keeps exact grid points (mean = 1 on Hadamard data)
    // from rounding down.
    const double scaled = std::floor(mean * (kSummaryLevels / 2.0) + 1e-9);
    levels[static_cast<std::size_t>(b)] = static_cast<int>(std::min<double>(kSummaryLevels - 1, scaled));
  }
  return levels;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const TransformerShape shape = config.shape();
  Rng rng = make_stream({seed, 0x696e6974});
  if (config.precision == Precision::f32) {
    net_.emplace<Transformer<float>>(shape);
  } else {
    net_.emplace<Transformer<double>>(shape);
  }
  std::visit([&](auto& net) { net.initialize(rng); }, net_);
}

std::int64_t Model::optimizer_step() const {
  return std::visit([](const auto& net) { return net.step(); }, net_);
}

std::size_t Model::parameter_count() const {
  return std::visit([](const auto& net) { return net.parameter_count(); }, net_);
}

void Model::append_example(TokenBatch& batch, const GsArray& a, int segment) const {
  if (a.order() != config_.n) throw std::invalid_argument("example order does not match the model");
  const int s = config_.stacking;
  const Tokenizer tok(s, config_.sequence_bits());
  const int length = config_.context_length();
  if (batch.batch == 0) batch.length = length;
  std::vector<int> body;
  if (config_.uses_score) {
    body = tok.encode(a.segment(segment));
    batch.inputs.push_back(segment_id(s, segment));
    const auto levels = residual_summary(partial_power(a, kSegments), partial_power(a, segment));
    for (int q : levels) batch.inputs.push_back(level_id(s, q));
    for (int k = 0; k < kSummaryBands; ++k) batch.targets.push_back({0, 0});
  } else {
    body = tok.encode(a.entries());
    batch.inputs.push_back(bos_id(s));
  }
  for (int t = 0; t < tok.tokens(); ++t) {
    if (t + 1 < tok.tokens()) batch.inputs.push_back(body[static_cast<std::size_t>(t)]);
    batch.targets.push_back(tok.target(t, body[static_cast<std::size_t>(t)]));
  }
  ++batch.batch;
}

TokenBatch Model::make_batch(std::span<const GsArray> arrays) const {
  TokenBatch batch;
  for (const GsArray& a : arrays) {
    if (config_.uses_score) {
      for (int i = 0; i < kSegments; ++i) append_example(batch, a, i);
    } else {
      append_example(batch, a);
    }
  }
  return batch;
}

double Model::loss(const TokenBatch& batch) const {
  return std::visit([&](const auto& net) { return net.loss(batch.inputs, batch.targets, batch.batch, batch.length); },
                    net_);
}

double Model::loss_and_grad(const TokenBatch& batch) {
  return std::visit(
      [&](auto& net) { return net.loss_and_grad(batch.inputs, batch.targets, batch.batch, batch.length); }, net_);
}

TrainReport Model::train(std::span<const GsArray> data, const TrainConfig& config, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (config.batch_size <= 0) throw std::invalid_argument("batch_size: must be positive");
  if (config.steps < 0) throw std::invalid_argument("training_steps: must be non-negative");
  train_config_ = config;
  TrainReport report;
  const int len = config_.n / 4;
  for (int step = 0; step < config.steps; ++step) {
    Rng rng = make_stream({seed, static_cast<std::uint64_t>(step)});
    TokenBatch batch;
    batch.inputs.reserve(static_cast<std::size_t>(config.batch_size * config_.context_length()));
    for (int b = 0; b < config.batch_size; ++b) {
      const GsArray& base = data[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(data.size())))];
      const GsArray a = config.augment ? random_element(len, rng).apply(base) : base;
      append_example(batch, a, config_.uses_score ? uniform_index(rng, kSegments) : 0);
    }
    const double loss = loss_and_grad(batch);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) + ")");
    }
    report.losses.push_back(loss);
    double lr = config.learning_rate;
    if (config.warmup_steps > 0 && step < config.warmup_steps) lr *= static_cast<double>(step + 1) / config.warmup_steps;
    std::visit([&](auto& net) { net.adamw_step(config.adamw, lr); }, net_);
  }
  if (!report.losses.empty()) {
    const std::size_t tail = std::max<std::size_t>(1, report.losses.size() / 10);
    double total = 0.0;
    for (std::size_t k = report.losses.size() - tail; k < report.losses.size(); ++k) total += report.losses[k];
    report.final_loss = total / static_cast<double>(tail);
  }
  return report;
}

std::vector<GsArray> Model::sample(int count, double temperature, std::uint64_t seed) const {
  if (config_.uses_score) return conditioned_sample(count, temperature, seed);
  if (count < 0) throw std::invalid_argument("sample count must be non-negative");
  const Tokenizer tok(config_.stacking, config_.n);
  const int vocab = config_.vocab_out();
  std::vector<GsArray> out(static_cast<std::size_t>(count));
  const int chunks = (count + kSampleChunk - 1) / kSampleChunk;
#pragma omp parallel for schedule(dynamic, 1)
  for (int ch = 0; ch < chunks; ++ch) {
    const int begin = ch * kSampleChunk;
    const int size = std::min(kSampleChunk, count - begin);
    std::vector<Rng> rngs;
    for (int c = 0; c < size; ++c) rngs.push_back(make_stream({seed, static_cast<std::uint64_t>(begin + c)}));
    std::vector<std::vector<int>> tokens(static_cast<std::size_t>(size));
    std::vector<int> ids(static_cast<std::size_t>(size), bos_id(config_.stacking));
    std::visit(
        [&](const auto& net) {
          auto cache = net.start_decode(size);
          std::vector<double> row(static_cast<std::size_t>(vocab));
          for (int t = 0; t < tok.tokens(); ++t) {
            const auto logits = net.decode(cache, ids);
            for (int c = 0; c < size; ++c) {
              for (int v = 0; v < vocab; ++v) row[static_cast<std::size_t>(v)] = static_cast<double>(logits(c, v));
              const int id = draw_token(row.data(), tok, t, temperature, rngs[static_cast<std::size_t>(c)]);
              tokens[static_cast<std::size_t>(c)].push_back(id);
              ids[static_cast<std::size_t>(c)] = id;
            }
          }
        },
        net_);
    for (int c = 0; c < size; ++c) {
      out[static_cast<std::size_t>(begin + c)] = GsArray(config_.n, tok.decode(tokens[static_cast<std::size_t>(c)]));
    }
  }
  return out;
}

std::vector<GsArray> Model::conditioned_sample(int count, double temperature, std::uint64_t seed) const {
  if (!config_.uses_score) throw std::logic_error("conditioned_sample requires a score-conditioned model");
  if (count < 0) throw std::invalid_argument("sample count must be non-negative");
  const int len = config_.n / 4;
  const int s = config_.stacking;
  const Tokenizer tok(s, len);
  const int vocab = config_.vocab_out();
  const std::vector<double> ideal(static_cast<std::size_t>(len), 1.0);
  std::vector<GsArray> out(static_cast<std::size_t>(count));
  const int chunks = (count + kSampleChunk - 1) / kSampleChunk;
#pragma omp parallel for schedule(dynamic, 1)
  for (int ch = 0; ch < chunks; ++ch) {
    const int begin = ch * kSampleChunk;
    const int size = std::min(kSampleChunk, count - begin);
    std::vector<Rng> rngs;
    for (int c = 0; c < size; ++c) rngs.push_back(make_stream({seed, static_cast<std::uint64_t>(begin + c)}));
    std::vector<std::vector<std::int8_t>> entries(static_cast<std::size_t>(size));
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(size), std::vector<double>(static_cast<std::size_t>(len), 0.0));
    std::visit(
        [&](const auto& net) {
          std::vector<double> row(static_cast<std::size_t>(vocab));
          for (int seg = 0; seg < kSegments; ++seg) {
            auto cache = net.start_decode(size);
            std::vector<int> ids(static_cast<std::size_t>(size), segment_id(s, seg));
            auto logits = net.decode(cache, ids);
            std::vector<std::array<int, kSummaryBands>> levels;
            for (int c = 0; c < size; ++c) levels.push_back(residual_summary(ideal, partial[static_cast<std::size_t>(c)]));
            for (int k = 0; k < kSummaryBands; ++k) {
              for (int c = 0; c < size; ++c) ids[static_cast<std::size_t>(c)] = level_id(s, levels[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)]);
              logits = net.decode(cache, ids);
            }
            std::vector<std::vector<int>> body(static_cast<std::size_t>(size));
            for (int t = 0; t < tok.tokens(); ++t) {
              if (t > 0) logits = net.decode(cache, ids);
              for (int c = 0; c < size; ++c) {
                for (int v = 0; v < vocab; ++v) row[static_cast<std::size_t>(v)] = static_cast<double>(logits(c, v));
                const int id = draw_token(row.data(), tok, t, temperature, rngs[static_cast<std::size_t>(c)]);
                body[static_cast<std::size_t>(c)].push_back(id);
                ids[static_cast<std::size_t>(c)] = id;
              }
            }
            for (int c = 0; c < size; ++c) {
              const auto segment = tok.decode(body[static_cast<std::size_t>(c)]);
              add_power(segment, config_.n, partial[static_cast<std::size_t>(c)]);
              auto& e = entries[static_cast<std::size_t>(c)];
              e.insert(e.end(), segment.begin(), segment.end());
            }
          }
        },
        net_);
    for (int c = 0; c < size; ++c) {
      out[static_cast<std::size_t>(begin + c)] = GsArray(config_.n, std::move(entries[static_cast<std::size_t>(c)]));
    }
  }
  return out;
}

std::vector<double> Model::logits(std::span<const int> inputs, int batch, int length) const {
  return std::visit([&](const auto& net) { return logits_row_major(net, inputs, batch, length); }, net_);
}

nlohmann::json Model::manifest() const {
  return {{"config", to_json(config_)},
          {"train", to_json(train_config_)},
          {"step", optimizer_step()},
          {"parameters", parameter_count()}};
}

std::vector<Blob> Model::blobs(const std::string& prefix) const {
  return std::visit(
      [&](const auto& net) {
        using T = typename std::decay_t<decltype(net.params())>::value_type;
        return std::vector<Blob>{Blob::from<T>(prefix + "params", net.params()),
                                 Blob::from<T>(prefix + "adam_m", net.adam_m()),
                                 Blob::from<T>(prefix + "adam_v", net.adam_v())};
      },
      net_);
}

Model Model::from_container(const nlohmann::json& manifest, const Container& c, const std::string& prefix) {
  Model m;
  m.config_ = model_config_from_json(manifest.at("config"));
  m.train_config_ = train_config_from_json(manifest.at("train"));
  const TransformerShape shape = m.config_.shape();
  auto restore = [&](auto& net) {
    using T = typename std::decay_t<decltype(net.params())>::value_type;
    auto params = c.blob(prefix + "params").as<T>();
    auto am = c.blob(prefix + "adam_m").as<T>();
    auto av = c.blob(prefix + "adam_v").as<T>();
    if (params.size() != net.parameter_count() || am.size() != params.size() || av.size() != params.size()) {
      throw ContainerError("model tensor sizes do not match the configuration");
    }
    net.params().assign(params.begin(), params.end());
    net.adam_m().assign(am.begin(), am.end());
    net.adam_v().assign(av.begin(), av.end());
    net.set_step(manifest.at("step").get<std::int64_t>());
  };
  if (m.config_.precision == Precision::f32) {
    restore(m.net_.emplace<Transformer<float>>(shape));
  } else {
    restore(m.net_.emplace<Transformer<double>>(shape));
  }
  return m;
}

void Model::save(const std::filesystem::path& path) const {
  Container c;
  c.manifest = {{"kind", "model"}, {"model", manifest()}};
  c.blobs = blobs();
  write_container(path, c);
}

Model Model::load(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.manifest.value("kind", "") != "model") throw ContainerError(path.string() + " is not a model file");
  return from_container(c.manifest.at("model"), c);
}

}  // namespace gsh

#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include "gsh/loop.hpp"
#include "gsh/text_format.hpp"

namespace gsh {

namespace {

constexpr int kRunStateVersion = 1;

std::string precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::uint8_t> pack(std::span<const GsArray> arrays) {
  std::vector<std::uint8_t> out;
  for (const GsArray& a : arrays) {
    for (std::int8_t e : a.entries()) out.push_back(e > 0 ? 1 : 0);
  }
  return out;
}

std::vector<GsArray> unpack(const Blob& blob, int n, std::size_t count) {
  if (blob.dtype != "u8") throw ContainerError("blob " + blob.name + " has dtype " + blob.dtype);
  if (blob.bytes.size() != count * static_cast<std::size_t>(n)) {
    throw ContainerError("blob " + blob.name + " has the wrong size");
  }
  std::vector<GsArray> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<std::int8_t> e(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const std::uint8_t b = blob.bytes[c * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
      if (b > 1) throw ContainerError("blob " + blob.name + " holds a value other than 0 or 1");
      e[static_cast<std::size_t>(j)] = b ? std::int8_t{1} : std::int8_t{-1};
    }
    out.emplace_back(n, std::move(e));
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  return {{"n", c.n},
          {"sample_size", c.sample_size},
          {"training_size", c.training_size},
          {"learning_rate", c.learning_rate},
          {"training_steps", c.training_steps},
          {"temperature", c.temperature},
          {"num_improve", c.num_improve},
          {"segment_sums", c.segment_sums ? nlohmann::json(format_segment_sums(*c.segment_sums)) : nlohmann::json()},
          {"stacking", c.stacking},
          {"n_layer", c.n_layer},
          {"n_embd", c.n_embd},
          {"n_head", c.n_head},
          {"transformer_uses_score", c.transformer_uses_score},
          {"generations", c.generations},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"resume_fraction", c.resume_fraction},
          {"resume_lr_factor", c.resume_lr_factor},
          {"warmup_steps", c.warmup_steps},
          {"precision", precision_name(c.precision)},
          {"ladder_rungs", c.ladder_rungs},
          {"ladder_t_min", c.ladder_t_min},
          {"ladder_t_max", c.ladder_t_max}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (!j.is_object()) throw std::invalid_argument("run configuration must be an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "n") c.n = v.get<int>();
      else if (key == "sample_size") c.sample_size = v.get<int>();
      else if (key == "training_size") c.training_size = v.get<int>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "training_steps") c.training_steps = v.get<int>();
      else if (key == "temperature") c.temperature = v.get<double>();
      else if (key == "num_improve") c.num_improve = v.get<int>();
      else if (key == "segment_sums") {
        if (v.is_null()) c.segment_sums.reset();
        else c.segment_sums = parse_segment_sums(v.get<std::string>());
      }
      else if (key == "stacking") c.stacking = v.get<int>();
      else if (key == "n_layer") c.n_layer = v.get<int>();
      else if (key == "n_embd") c.n_embd = v.get<int>();
      else if (key == "n_head") c.n_head = v.get<int>();
      else if (key == "transformer_uses_score") c.transformer_uses_score = v.get<bool>();
      else if (key == "generations") c.generations = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "resume_fraction") c.resume_fraction = v.get<double>();
      else if (key == "resume_lr_factor") c.resume_lr_factor = v.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = v.get<int>();
      else if (key == "precision") {
        const auto p = v.get<std::string>();
        if (p != "f32" && p != "f64") throw std::invalid_argument("unknown value " + p);
        c.precision = p == "f32" ? Precision::f32 : Precision::f64;
      }
      else if (key == "ladder_rungs") c.ladder_rungs = v.get<int>();
      else if (key == "ladder_t_min") c.ladder_t_min = v.get<double>();
      else if (key == "ladder_t_max") c.ladder_t_max = v.get<double>();
      else throw std::invalid_argument("unknown key");
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      if (what.rfind(key + ":", 0) == 0) throw;
      throw std::invalid_argument(key + ": " + what);
    }
  }
  return c;
}

nlohmann::json to_json(const GenerationStats& s) {
  nlohmann::json j = {{"gen", s.gen},
                      {"wall_seconds", s.wall_seconds},
                      {"loss_train", s.loss_train},
                      {"score_sample_mean", s.score_sample_mean},
                      {"score_selected_mean", s.score_selected_mean},
                      {"hadamard_ratio_sample", s.hadamard_ratio_sample},
                      {"hadamard_ratio_selected", s.hadamard_ratio_selected},
                      {"archive_size", s.archive_size}};
  if (s.sum_ratio_sample) j["sum_ratio_sample"] = *s.sum_ratio_sample;
  return j;
}

GenerationStats generation_stats_from_json(const nlohmann::json& j) {
  // NaN means are stored as null.
  auto num = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  GenerationStats s;
  s.gen = j.at("gen").get<int>();
  s.wall_seconds = num("wall_seconds");
  s.loss_train = num("loss_train");
  s.score_sample_mean = num("score_sample_mean");
  s.score_selected_mean = num("score_selected_mean");
  s.hadamard_ratio_sample = num("hadamard_ratio_sample");
  s.hadamard_ratio_selected = num("hadamard_ratio_selected");
  s.archive_size = j.at("archive_size").get<std::int64_t>();
  if (j.contains("sum_ratio_sample")) s.sum_ratio_sample = num("sum_ratio_sample");
  return s;
}

std::string stats_csv_header() {
  return "gen,loss_train,score_sample_mean,score_selected_mean,hadamard_ratio_sample,hadamard_ratio_selected,"
         "archive_size";
}

std::string stats_csv_row(const GenerationStats& s) {
  return std::to_string(s.gen) + "," + number(s.loss_train) + "," + number(s.score_sample_mean) + "," +
         number(s.score_selected_mean) + "," + number(s.hadamard_ratio_sample) + "," +
         number(s.hadamard_ratio_selected) + "," + std::to_string(s.archive_size);
}

Container checkpoint_container(const RunState& state) {
  const TemperatureLadder& ladder = state.ladder;
  nlohmann::json stats = nlohmann::json::array();
  for (const GenerationStats& s : state.stats) stats.push_back(to_json(s));
  Container c;
  c.manifest = {{"kind", "run"},
                {"run_version", kRunStateVersion},
                {"config", to_json(state.config)},
                {"generation", state.generation},
                {"pending_train", state.pending_train},
                {"current", to_json(state.current)},
                {"stats", stats},
                {"rng", {{"seed", state.config.seed}, {"streams", "splitmix64 path (seed, generation, phase)"}}},
                {"population_size", state.population.size()},
                {"archive_size", state.archive.size()},
                {"ladder", {{"rungs", ladder.rungs()}, {"target_lo", ladder.target_lo()}, {"target_hi", ladder.target_hi()}}},
                {"model", state.model.manifest()}};
  c.blobs.push_back(Blob::from<std::uint8_t>("population", pack(state.population)));
  c.blobs.push_back(Blob::from<double>("population.scores", state.scores));
  c.blobs.push_back(Blob::from<std::uint8_t>("archive", pack(state.archive)));
  c.blobs.push_back(Blob::from<double>("ladder.temperatures", ladder.temperatures()));
  std::vector<std::int64_t> counters;
  for (auto v : {ladder.attempts(), ladder.accepts(), ladder.window_attempts(), ladder.window_accepts()}) {
    counters.insert(counters.end(), v.begin(), v.end());
  }
  c.blobs.push_back(Blob::from<std::int64_t>("ladder.counters", counters));
  for (Blob& b : state.model.blobs("model.")) c.blobs.push_back(std::move(b));
  return c;
}

RunState restore_state(const Container& c) {
  const nlohmann::json& m = c.manifest;
  if (m.value("kind", "") != "run") throw ContainerError("not a run checkpoint");
  const int version = m.value("run_version", -1);
  if (version != kRunStateVersion) {
    throw ContainerError("run checkpoint version " + std::to_string(version) + " is not supported (this build reads version " +
                         std::to_string(kRunStateVersion) + ")");
  }
  try {
    RunState s;
    s.config = run_config_from_json(m.at("config"));
    s.config.validate();
    s.generation = m.at("generation").get<int>();
    s.pending_train = m.at("pending_train").get<bool>();
    s.current = generation_stats_from_json(m.at("current"));
    for (const auto& row : m.at("stats")) s.stats.push_back(generation_stats_from_json(row));
    const auto pop = m.at("population_size").get<std::size_t>();
    const auto arch = m.at("archive_size").get<std::size_t>();
    s.population = unpack(c.blob("population"), s.config.n, pop);
    s.scores = c.blob("population.scores").as<double>();
    if (s.scores.size() != pop) throw ContainerError("population scores have the wrong size");
    s.archive = unpack(c.blob("archive"), s.config.n, arch);

    const auto& lj = m.at("ladder");
    const int rungs = lj.at("rungs").get<int>();
    std::vector<double> temps = c.blob("ladder.temperatures").as<double>();
    std::vector<std::int64_t> counters = c.blob("ladder.counters").as<std::int64_t>();
    if (static_cast<int>(temps.size()) != rungs) throw ContainerError("ladder temperatures have the wrong size");
    if (rungs >= 2) {
      s.ladder = TemperatureLadder(temps, lj.at("target_lo").get<double>(), lj.at("target_hi").get<double>());
      const std::size_t pairs = static_cast<std::size_t>(rungs - 1);
      if (counters.size() != 4 * pairs) throw ContainerError("ladder counters have the wrong size");
      auto it = counters.begin();
      for (auto* v : {&s.ladder.mutable_attempts(), &s.ladder.mutable_accepts(), &s.ladder.mutable_window_attempts(),
                      &s.ladder.mutable_window_accepts()}) {
        v->assign(it, it + static_cast<std::ptrdiff_t>(pairs));
        it += static_cast<std::ptrdiff_t>(pairs);
      }
    } else if (!counters.empty()) {
      throw ContainerError("ladder counters have the wrong size");
    }
    s.model = Model::from_container(m.at("model"), c, "model.");
    if (s.model.config().n != s.config.n) throw ContainerError("model order does not match the run");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(std::string("malformed run manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ContainerError(std::string("invalid run manifest: ") + e.what());
  }
}

void save_checkpoint(const RunState& state, const std::filesystem::path& path) {
  write_container(path, checkpoint_container(state));
}

RunState load_checkpoint(const std::filesystem::path& path) {
  try {
    return restore_state(read_container(path));
  } catch (const ContainerError& e) {
    throw ContainerError(path.string() + ": " + e.what());
  }
}

RunDirectory::RunDirectory(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "checkpoints");
}

std::filesystem::path RunDirectory::checkpoint_path(int gen) const {
  char name[32];
  std::snprintf(name, sizeof name, "gen-%03d", gen);
  return root_ / "checkpoints" / name;
}

std::optional<std::filesystem::path> RunDirectory::latest_checkpoint() const {
  static const std::regex pattern("gen-([0-9]+)");
  std::optional<std::filesystem::path> best;
  long best_gen = -1;
  for (const auto& entry : std::filesystem::directory_iterator(root_ / "checkpoints")) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, match, pattern)) {
      const long g = std::stol(match[1].str());
      if (g > best_gen) {
        best_gen = g;
        best = entry.path();
      }
    }
  }
  return best;
}

void RunDirectory::sync(const RunState& state) const {
  write_text_atomic(root_ / "archive.txt", format_arrays(state.archive));
  write_stats(state.stats);
}

void RunDirectory::append_archive(std::span<const GsArray> found) const {
  if (found.empty()) return;
  const std::filesystem::path path = root_ / "archive.txt";
  const bool nonempty = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  if (nonempty) out << '\n';
  write_arrays(out, found);
}

void RunDirectory::write_stats(std::span<const GenerationStats> rows) const {
  std::string csv = stats_csv_header() + "\n", jsonl;
  for (const GenerationStats& s : rows) {
    csv += stats_csv_row(s) + "\n";
    jsonl += to_json(s).dump() + "\n";
  }
  write_text_atomic(root_ / "stats.csv", csv);
  write_text_atomic(root_ / "stats.jsonl", jsonl);
}

void run_loop(RunState& state, const RunDirectory& dir, const std::function<void(const std::string&)>& log) {
  dir.sync(state);
  GenerationHooks hooks;
  hooks.before_train = [&](const RunState& s, std::span<const GsArray> found) {
    dir.append_archive(found);
    save_checkpoint(s, dir.checkpoint_path(s.generation));
  };
  hooks.after_generation = [&](const RunState& s) {
    dir.write_stats(s.stats);
    save_checkpoint(s, dir.checkpoint_path(s.generation - 1));
    if (log) {
      const GenerationStats& r = s.stats.back();
      std::ostringstream msg;
      msg << "gen " << r.gen << ": loss " << number(r.loss_train) << ", sample score " << number(r.score_sample_mean)
          << ", selected score " << number(r.score_selected_mean) << ", hadamard ratio " << number(r.hadamard_ratio_sample)
          << " / " << number(r.hadamard_ratio_selected) << ", archive " << r.archive_size << " ("
          << number(r.wall_seconds) << " s)";
      log(msg.str());
    }
  };
  hooks.warn = [&](const std::string& w) {
    if (log) log("warning: " + w);
  };
  while (!state.finished()) run_generation(state, hooks);
}

}  // namespace gsh

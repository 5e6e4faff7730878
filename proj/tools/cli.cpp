#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gsh/enumerate.hpp"
#include "gsh/loop.hpp"
#include "gsh/segment_sums.hpp"
#include "gsh/spectrum.hpp"
#include "gsh/symmetry.hpp"
#include "gsh/container.hpp"
#include "gsh/text_format.hpp"

extern char** environ;

namespace gsh::cli {

namespace {

namespace fs = std::filesystem;

// A usage or configuration problem (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("'" + s + "' is not an integer");
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("'" + s + "' is not a number");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw std::invalid_argument("'" + s + "' is not a non-negative integer");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + s + "' is out of range");
  }
}

bool to_bool(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("'" + s + "' is not a boolean");
}

struct Field {
  std::string name;  // RunConfig field, also the config-file key
  std::string help;
  bool flag;         // boolean switch on the command line
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"n", "matrix order (multiple of 4)", false, [](RunConfig& c, const std::string& v) { c.n = to_int(v); }},
      {"sample_size", "candidates per generation", false,
       [](RunConfig& c, const std::string& v) { c.sample_size = to_int(v); }},
      {"training_size", "selected training set size (0: 10% of sample_size)", false,
       [](RunConfig& c, const std::string& v) { c.training_size = to_int(v); }},
      {"learning_rate", "AdamW learning rate of the first generation", false,
       [](RunConfig& c, const std::string& v) { c.learning_rate = to_double(v); }},
      {"training_steps", "training steps of the first generation", false,
       [](RunConfig& c, const std::string& v) { c.training_steps = to_int(v); }},
      {"temperature", "sampling temperature", false,
       [](RunConfig& c, const std::string& v) { c.temperature = to_double(v); }},
      {"num_improve", "improvement rounds (> 0 also runs tempering)", false,
       [](RunConfig& c, const std::string& v) { c.num_improve = to_int(v); }},
      {"segment_sums", "fixed segment sums k1,k2,k3,k4 (or 'none')", false,
       [](RunConfig& c, const std::string& v) {
         if (v.empty() || v == "none") c.segment_sums.reset();
         else c.segment_sums = parse_segment_sums(v);
       }},
      {"stacking", "bits per token", false, [](RunConfig& c, const std::string& v) { c.stacking = to_int(v); }},
      {"n_layer", "transformer layers", false, [](RunConfig& c, const std::string& v) { c.n_layer = to_int(v); }},
      {"n_embd", "embedding width", false, [](RunConfig& c, const std::string& v) { c.n_embd = to_int(v); }},
      {"n_head", "attention heads", false, [](RunConfig& c, const std::string& v) { c.n_head = to_int(v); }},
      {"transformer_uses_score", "score-conditioned segment-by-segment model", true,
       [](RunConfig& c, const std::string& v) { c.transformer_uses_score = to_bool(v); }},
      {"generations", "generations to run", false,
       [](RunConfig& c, const std::string& v) { c.generations = to_int(v); }},
      {"seed", "master seed", false, [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"batch_size", "training batch size", false,
       [](RunConfig& c, const std::string& v) { c.batch_size = to_int(v); }},
      {"resume_fraction", "share of training_steps in later generations", false,
       [](RunConfig& c, const std::string& v) { c.resume_fraction = to_double(v); }},
      {"resume_lr_factor", "learning-rate factor in later generations", false,
       [](RunConfig& c, const std::string& v) { c.resume_lr_factor = to_double(v); }},
      {"warmup_steps", "linear warmup steps (-1: 10% with segment_sums, else 0)", false,
       [](RunConfig& c, const std::string& v) { c.warmup_steps = to_int(v); }},
      {"precision", "f32 or f64", false,
       [](RunConfig& c, const std::string& v) {
         if (v != "f32" && v != "f64") throw std::invalid_argument("must be f32 or f64, got '" + v + "'");
         c.precision = v == "f32" ? Precision::f32 : Precision::f64;
       }},
      {"ladder_rungs", "tempering rungs (< 2 disables tempering)", false,
       [](RunConfig& c, const std::string& v) { c.ladder_rungs = to_int(v); }},
      {"ladder_t_min", "coldest tempering temperature", false,
       [](RunConfig& c, const std::string& v) { c.ladder_t_min = to_double(v); }},
      {"ladder_t_max", "initial hottest tempering temperature", false,
       [](RunConfig& c, const std::string& v) { c.ladder_t_max = to_double(v); }},
  };
  return table;
}

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::string env_name(const std::string& field) {
  std::string s = "GSH_" + field;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

const Field* find_field(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  for (const Field& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

void apply(RunConfig& c, const Field& f, const std::string& value, const std::string& source) {
  try {
    f.set(c, value);
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw UsageError(source + ": " + (what.rfind(f.name + ":", 0) == 0 ? what : f.name + ": " + what));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<GsArray> read_matrix_file(const std::string& path) {
  const std::string text = path == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : read_file(path);
  try {
    return parse_arrays(text);
  } catch (const ParseError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text)) throw UsageError("cannot write " + path);
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---- run ------------------------------------------------------------------

struct RunArgs {
  std::string config_file;
  std::map<std::string, std::string> flags;  // field -> raw value, given only
  std::string out;
  std::string resume;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err,
            const std::map<std::string, std::string>& env) {
  RunConfig cfg;
  std::set<std::string> given;
  if (!args.config_file.empty()) {
    if (!fs::exists(args.config_file)) throw UsageError("config file " + args.config_file + " not found");
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_file(args.config_file);
    } catch (const CLI::Error& e) {
      throw UsageError(args.config_file + ": " + e.what());
    }
    for (const CLI::ConfigItem& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty()) throw UsageError(args.config_file + ": sections are not supported (" + item.fullname() + ")");
      const Field* f = find_field(item.name);
      if (f == nullptr) throw UsageError(args.config_file + ": unknown key " + item.name);
      std::string value;
      for (const std::string& v : item.inputs) value += (value.empty() ? "" : ",") + v;
      apply(cfg, *f, value, args.config_file);
      given.insert(f->name);
    }
  }
  for (const Field& f : fields()) {
    const auto it = env.find(env_name(f.name));
    if (it == env.end()) continue;
    apply(cfg, f, it->second, "environment " + it->first);
    given.insert(f.name);
  }
  for (const auto& [name, value] : args.flags) {
    apply(cfg, *find_field(name), value, "--" + dashed(name));
    given.insert(name);
  }

  RunState state;
  fs::path out_dir = args.out;
  if (!args.resume.empty()) {
    fs::path ckpt = args.resume;
    if (fs::is_directory(ckpt)) {
      const auto latest = RunDirectory(ckpt).latest_checkpoint();
      if (!latest) throw UsageError("no checkpoint in " + ckpt.string());
      if (out_dir.empty()) out_dir = ckpt;
      ckpt = *latest;
    } else if (!fs::exists(ckpt)) {
      throw UsageError("checkpoint " + ckpt.string() + " not found");
    } else if (out_dir.empty()) {
      out_dir = ckpt.parent_path().parent_path();
    }
    try {
      state = load_checkpoint(ckpt);
    } catch (const ContainerError& e) {
      throw UsageError(e.what());
    }
    for (const std::string& name : given) {
      if (name == "generations") {
        if (cfg.generations < state.generation) {
          throw UsageError("generations: the checkpoint already completed " + std::to_string(state.generation));
        }
        state.config.generations = cfg.generations;
      } else {
        err << "warning: " << name << " is taken from the checkpoint when resuming\n";
      }
    }
    err << "resuming from " << ckpt.string() << " at generation " << state.generation << "\n";
  } else {
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("invalid configuration: ") + e.what());
    }
    state = start_run(cfg);
    if (out_dir.empty()) out_dir = "gsh_run";
  }

  const RunDirectory dir(out_dir);
  run_loop(state, dir, [&](const std::string& line) { err << line << "\n" << std::flush; });
  out << "archive: " << state.archive.size() << " arrays in " << (dir.root() / "archive.txt").string() << "\n";
  out << "stats: " << (dir.root() / "stats.csv").string() << "\n";
  return kOk;
}

// ---- verify / canon ---------------------------------------------------------

int cmd_verify(const std::string& path, std::ostream& out) {
  const std::vector<GsArray> arrays = read_matrix_file(path);
  bool all = true;
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const GsArray& a = arrays[i];
    const bool ok = is_hadamard(a);
    all = all && ok;
    out << (i + 1) << " n=" << a.order() << " hadamard=" << (ok ? "yes" : "no") << " score=" << fmt(score(a))
        << " sums=" << format_segment_sums(segment_sums(a)) << " stabilizer=" << stabilizer_order(a) << "\n";
  }
  return all ? kOk : kVerifyFailed;
}

int cmd_canon(const std::string& path, const std::string& out_path, const std::string& counts_path,
              std::ostream& out, std::ostream& err) {
  const std::vector<GsArray> arrays = read_matrix_file(path);
  std::vector<GsArray> forms;
  std::vector<std::int64_t> counts;
  std::map<std::string, std::size_t> index;
  for (const GsArray& a : arrays) {
    GsArray c = canonicalize(a);
    const auto [it, fresh] = index.emplace(c.key(), forms.size());
    if (fresh) {
      forms.push_back(std::move(c));
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  write_output(out_path, format_arrays(forms), out);
  std::string table = "orbit,n,count\n";
  for (std::size_t i = 0; i < forms.size(); ++i) {
    table += std::to_string(i + 1) + "," + std::to_string(forms[i].order()) + "," + std::to_string(counts[i]) + "\n";
  }
  if (counts_path.empty()) {
    err << table;
  } else {
    write_output(counts_path, table, out);
  }
  return kOk;
}

// ---- enumerate --------------------------------------------------------------

struct EnumerateArgs {
  int n = 0;
  int from = 0;
  bool brute_force = false;
  bool orbits = true;
  std::string list;
};

int cmd_enumerate(const EnumerateArgs& args, std::ostream& out, std::ostream& err) {
  auto check_n = [](int n, const char* what) {
    if (n < 4 || n % 4 != 0) throw UsageError(std::string(what) + ": " + std::to_string(n) + " is not a positive multiple of 4");
    if (n > kMaxEnumerateOrder) {
      throw UsageError(std::string(what) + ": enumeration supports n <= " + std::to_string(kMaxEnumerateOrder));
    }
  };
  check_n(args.n, "--n");
  const int from = args.from > 0 ? args.from : args.n;
  check_n(from, "--from");
  if (from > args.n) throw UsageError("--from must not exceed --n");
  if (args.brute_force && args.n > kMaxBruteForceOrder) {
    throw UsageError("--brute-force supports n <= " + std::to_string(kMaxBruteForceOrder));
  }
  if (!args.list.empty() && from != args.n) throw UsageError("--list needs a single order");

  std::vector<EnumerateResult> results;
  bool agree = true;
  for (int n = from; n <= args.n; n += 4) {
    EnumerateOptions o;
    o.orbit_count = args.orbits;
    o.keep_arrays = !args.list.empty();
    results.push_back(enumerate_gs(n, o));
    const EnumerateResult& r = results.back();
    if (r.disagreements != 0) {
      agree = false;
      err << "n=" << n << ": checkers disagree on " << r.disagreements << " candidates\n";
    }
    if (args.brute_force) {
      const BruteForceResult b = brute_force_count(n);
      const bool same = b.exact == r.count && b.disagreements == 0;
      agree = agree && same;
      err << "n=" << n << ": brute force " << b.exact << (same ? " (agrees)" : " (MISMATCH)") << "\n";
    }
  }
  out << enumeration_csv(results);
  if (!args.list.empty()) write_output(args.list, format_arrays(results.back().arrays), out);
  if (results.size() >= 4) {
    std::vector<std::pair<int, double>> counts;
    for (const EnumerateResult& r : results) counts.emplace_back(r.n, static_cast<double>(r.count));
    err << "growth base " << fmt(growth_report(counts), "%.4f") << " over n=" << from << ".." << args.n << "\n";
  }
  return agree ? kOk : kVerifyFailed;
}

// ---- stats ------------------------------------------------------------------

int cmd_stats(const std::string& run_dir, const std::string& out_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw UsageError("run directory " + run_dir + " not found");
  const fs::path csv = dir / "stats.csv";
  if (!fs::exists(csv)) throw UsageError(csv.string() + " not found");
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError(csv.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::vector<std::pair<std::string, std::vector<std::string>>> series = {
      {"loss.csv", {"loss_train"}},
      {"score.csv", {"score_sample_mean", "score_selected_mean"}},
      {"hadamard_ratio.csv", {"hadamard_ratio_sample", "hadamard_ratio_selected"}},
      {"archive.csv", {"archive_size"}},
  };
  std::vector<std::string> texts;
  for (const auto& [file, cols] : series) {
    std::string t = "gen";
    for (const std::string& c : cols) {
      column(c);
      t += "," + c;
    }
    texts.push_back(t + "\n");
  }
  const std::size_t gen_col = column("gen");
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw UsageError(csv.string() + ":" + std::to_string(row) + ": wrong column count");
    for (std::size_t s = 0; s < series.size(); ++s) {
      texts[s] += cells[gen_col];
      for (const std::string& c : series[s].second) texts[s] += "," + cells[column(c)];
      texts[s] += "\n";
    }
  }
  const fs::path target = out_dir.empty() ? dir / "series" : fs::path(out_dir);
  fs::create_directories(target);
  for (std::size_t s = 0; s < series.size(); ++s) {
    write_output((target / series[s].first).string(), texts[s], out);
    out << (target / series[s].first).string() << "\n";
  }
  return kOk;
}

}  // namespace

std::map<std::string, std::string> process_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string kv = *e;
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.rfind("GSH_", 0) == 0) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env) {
  CLI::App app{"Goethals-Seidel Hadamard search by local search and a learned generator", "gsh"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: all cores; env GSH_THREADS)");

  CLI::App* run_cmd = app.add_subcommand("run", "run the generation loop");
  RunArgs run_args;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> options;
  for (const Field& f : fields()) {
    const std::string names = "--" + dashed(f.name) + (f.name.find('_') != std::string::npos ? ",--" + f.name : "");
    if (f.flag) {
      options[f.name] = run_cmd->add_flag(names + "{true}", raw[f.name], f.help);
    } else {
      options[f.name] = run_cmd->add_option(names, raw[f.name], f.help);
    }
  }
  run_cmd->add_option("--config", run_args.config_file, "flat TOML file of run settings (flags > env > file)");
  run_cmd->add_option("--out", run_args.out, "output directory (default gsh_run, or the resumed run's)");
  run_cmd->add_option("--resume", run_args.resume, "checkpoint file or run directory to continue");

  CLI::App* verify_cmd = app.add_subcommand("verify", "check every matrix of a file");
  std::string verify_path;
  verify_cmd->add_option("file", verify_path, "matrix file ('-' for stdin)")->required();

  CLI::App* canon_cmd = app.add_subcommand("canon", "canonical forms, one per orbit, with counts");
  std::string canon_path, canon_out, canon_counts;
  canon_cmd->add_option("file", canon_path, "matrix file ('-' for stdin)")->required();
  canon_cmd->add_option("--out", canon_out, "write the forms here instead of stdout");
  canon_cmd->add_option("--counts", canon_counts, "write the orbit counts CSV here instead of stderr");

  CLI::App* enum_cmd = app.add_subcommand("enumerate", "count GS Hadamard first rows exhaustively");
  EnumerateArgs enum_args;
  bool no_orbits = false;
  enum_cmd->add_option("--n", enum_args.n, "order (largest order with --from)")->required();
  enum_cmd->add_option("--from", enum_args.from, "also enumerate every order from here up to --n");
  enum_cmd->add_flag("--brute-force", enum_args.brute_force, "cross-check against all 2^n arrays");
  enum_cmd->add_flag("--no-orbits", no_orbits, "skip the canonical-form count");
  enum_cmd->add_option("--list", enum_args.list, "write every Hadamard array of the order here");

  CLI::App* stats_cmd = app.add_subcommand("stats", "split stats.csv into per-panel series");
  std::string stats_dir, stats_out;
  stats_cmd->add_option("dir", stats_dir, "run directory")->required();
  stats_cmd->add_option("--out", stats_out, "series directory (default DIR/series)");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "gsh: " << e.what() << "\n";
    if (app.got_subcommand(run_cmd) || app.got_subcommand(verify_cmd)) err << "\n";
    err << "run 'gsh --help' for usage\n";
    return kUsage;
  }

  const int default_threads = omp_get_max_threads();
  try {
    if (threads == 0) {
      const auto it = env.find("GSH_THREADS");
      if (it != env.end()) threads = to_int(it->second);
    }
    if (threads < 0) throw UsageError("--threads must be non-negative");
    if (threads > 0) omp_set_num_threads(threads);
    struct Restore {
      int n;
      ~Restore() { omp_set_num_threads(n); }
    } restore{default_threads};

    if (app.got_subcommand(run_cmd)) {
      for (const auto& [name, opt] : options) {
        if (opt->count() > 0) run_args.flags[name] = raw[name];
      }
      return cmd_run(run_args, out, err, env);
    }
    if (app.got_subcommand(verify_cmd)) return cmd_verify(verify_path, out);
    if (app.got_subcommand(canon_cmd)) return cmd_canon(canon_path, canon_out, canon_counts, out, err);
    if (app.got_subcommand(enum_cmd)) {
      enum_args.orbits = !no_orbits;
      return cmd_enumerate(enum_args, out, err);
    }
    return cmd_stats(stats_dir, stats_out, out);
  } catch (const UsageError& e) {
    err << "gsh: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "gsh: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "gsh: error: " << e.what() << "\n";
    return kVerifyFailed;
  }
}

}  // namespace gsh::cli

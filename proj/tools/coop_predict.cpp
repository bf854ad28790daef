// Copyright 2026 The coop_predict Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "coop/checkpoint.hpp"
#include "coop/dataset.hpp"
#include "coop/errors.hpp"
#include "coop/evaluate.hpp"
#include "coop/gradcheck_suite.hpp"
#include "coop/synthetic.hpp"
#include "coop/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw coop::DataError("cannot read " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string & path)
{
  try {
    return json::parse(read_file(path));
  } catch (const json::exception & e) {
    throw coop::ConfigError(path + ": " + e.what());
  }
}

std::string hex(const unsigned char * digest, std::size_t n)
{
  static const char * digits = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[digest[i] >> 4]);
    out.push_back(digits[digest[i] & 0xf]);
  }
  return out;
}

/// sha1("blob <size>\0<content>"), as git computes object ids.
std::string git_blob_hash(const std::string & content)
{
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  return hex(digest, len);
}

/// Files hash as blobs; directories as the blob hash of their sorted "<hash> <relative path>" listing.
std::string content_hash(const std::string & path)
{
  if (!fs::is_directory(path)) {
    return git_blob_hash(read_file(path));
  }
  std::vector<std::string> lines;
  for (const auto & entry : fs::recursive_directory_iterator(path)) {
    if (entry.is_regular_file()) {
      const std::string rel = fs::relative(entry.path(), path).generic_string();
      if (rel == "run_manifest.json") {
        continue;
      }
      lines.push_back(git_blob_hash(read_file(entry.path().string())) + " " + rel);
    }
  }
  std::sort(lines.begin(), lines.end(), [](const std::string & a, const std::string & b) {
    return a.substr(41) < b.substr(41);
  });
  std::string listing;
  for (const auto & l : lines) {
    listing += l + "\n";
  }
  return git_blob_hash(listing);
}

std::string timestamp()
{
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest
{
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed{0};
  std::string started{timestamp()};
  std::vector<std::string> outputs;

  void add_input(const std::string & name, const std::string & path)
  {
    inputs[name] = {{"path", path}, {"hash", content_hash(path)}};
  }

  void write(const std::string & run_dir) const
  {
    json j{{"command", command}, {"argv", argv},     {"config", config},     {"inputs", inputs},
           {"seed", seed},       {"started", started}, {"finished", timestamp()}, {"outputs", outputs}};
    fs::create_directories(run_dir);
    std::ofstream out(fs::path(run_dir) / "run_manifest.json");
    out << j.dump(2) << "\n";
  }
};

std::uint64_t resolve_seed(std::uint64_t config_seed, const CLI::Option * flag, std::uint64_t flag_value)
{
  std::uint64_t seed = config_seed;
  if (const char * env = std::getenv("COOP_PREDICT_SEED"); env != nullptr && *env != '\0') {
    try {
      seed = std::stoull(env);
    } catch (const std::exception &) {
      throw coop::ConfigError(std::string("COOP_PREDICT_SEED is not an unsigned integer: ") + env);
    }
  }
  if (flag != nullptr && flag->count() > 0) {
    seed = flag_value;
  }
  return seed;
}

bool parse_flag(const std::string & v)
{
  if (v == "1" || v == "true" || v == "yes" || v == "on" || v == "✓") {
    return true;
  }
  if (v == "0" || v == "false" || v == "no" || v == "off" || v == "×" || v == "x") {
    return false;
  }
  throw coop::ConfigError("expected a boolean flag value, got '" + v + "'");
}

std::vector<double> parse_grid(const std::string & text)
{
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    double start = 0;
    double stop = 0;
    double step = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || !(step > 0.0) || stop < start) {
      throw coop::ConfigError("grid range must be start:stop:step with step > 0");
    }
    const int n = static_cast<int>(std::floor((stop - start) / step + 1e-9));
    for (int i = 0; i <= n; ++i) {
      grid.push_back(start + i * step);
    }
    return grid;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception &) {
      throw coop::ConfigError("bad grid value '" + item + "'");
    }
  }
  if (grid.empty()) {
    throw coop::ConfigError("empty grid");
  }
  return grid;
}

std::vector<coop::Scene> load_scenes(const std::string & dir, const std::string & split_name, std::size_t limit)
{
  coop::Split split = coop::Split::Val;
  if (split_name == "train") {
    split = coop::Split::Train;
  } else if (split_name == "all") {
    split = coop::Split::All;
  } else if (split_name != "val") {
    throw coop::ConfigError("split must be train, val or all");
  }
  auto loaded = coop::load_split(dir, coop::read_manifest(dir), split);
  if (limit > 0 && loaded.scenes.size() > limit) {
    loaded.scenes.resize(limit);
  }
  if (loaded.scenes.empty()) {
    throw coop::EmptyInput("no usable scenes in split '" + split_name + "' of " + dir);
  }
  return loaded.scenes;
}

json defaults_json()
{
  coop::EvalConfig e;
  return {{"model_desk", coop::to_json(coop::ModelConfig::desk())},
          {"model_full", coop::to_json(coop::ModelConfig{})},
          {"train_desk", coop::to_json(coop::TrainConfig::desk())},
          {"train_full", coop::to_json(coop::TrainConfig{})},
          {"world", coop::to_json(coop::WorldSpec{})},
          {"eval",
           {{"theta_gt", e.theta_gt},
            {"theta_type", e.theta_type},
            {"theta_aoi", e.theta_aoi},
            {"beta", e.beta},
            {"k", json::array({1, 6})},
            {"seed", e.seed},
            {"miss_threshold_m", 2.0}}}};
}

struct EvalFlags
{
  std::string checkpoint;
  std::string data;
  std::string split{"val"};
  std::size_t limit{0};
  double theta_gt{0.0};
  double theta_type{0.0};
  std::string theta_aoi{"0"};
  double beta{1.0};
  int k{0};
  std::uint64_t seed{0};
  CLI::Option * seed_opt{nullptr};
  int workers{1};
  std::string out_dir{"."};

  void add(CLI::App * app)
  {
    app->add_option("--data", data, "dataset directory")->required();
    app->add_option("--split", split, "train, val or all")->capture_default_str();
    app->add_option("--limit", limit, "evaluate at most this many scenes (0 = all)");
    app->add_option("--theta-gt", theta_gt, "fraction of eligible actors made cooperative")->capture_default_str();
    app->add_option("--theta-type", theta_type, "fraction of cooperative actors sending trajectories")
      ->capture_default_str();
    app->add_option("--theta-aoi", theta_aoi, "AOI transmits its path (1/0)")->capture_default_str();
    app->add_option("--beta", beta, "speed factor for cooperative data")->capture_default_str();
    app->add_option("--k", k, "single K to report (default: 1 and M)");
    seed_opt = app->add_option("--seed", seed, "role sampling seed");
    app->add_option("--workers", workers, "parallel scenes")->capture_default_str();
    app->add_option("--out-dir", out_dir, "run directory for CSV and manifest")->capture_default_str();
  }

  coop::EvalConfig config() const
  {
    coop::EvalConfig c;
    c.theta_gt = theta_gt;
    c.theta_type = theta_type;
    c.theta_aoi = parse_flag(theta_aoi);
    c.beta = beta;
    c.seed = resolve_seed(0, seed_opt, seed);
    return c;
  }

  std::vector<int> ks(int modes) const
  {
    if (k != 0) {
      coop::EvalConfig c = config();
      c.k = k;
      c.validate(modes);
      return {k};
    }
    return modes == 1 ? std::vector<int>{1} : std::vector<int>{1, modes};
  }

  json to_json() const
  {
    return {{"theta_gt", theta_gt}, {"theta_type", theta_type}, {"theta_aoi", parse_flag(theta_aoi)},
            {"beta", beta},         {"k", k},                   {"split", split},
            {"limit", limit},       {"workers", workers}};
  }
};

void write_text(const fs::path & path, const std::string & text)
{
  std::ofstream out(path);
  if (!out) {
    throw coop::DataError("cannot write " + path.string());
  }
  out << text;
}

int run(int argc, char ** argv)
{
  CLI::App app{"Cooperative trajectory prediction: synthetic data, training, evaluation"};
  app.require_subcommand(0, 1);
  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "print every default configuration as JSON and exit");
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();

  RunManifest manifest;
  manifest.argv.assign(argv, argv + argc);

  // synth
  auto * synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec;
  std::string synth_out;
  std::size_t synth_n = 0;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec, "world spec JSON (defaults when omitted)");
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--n-scenes", synth_n, "override the number of scenes");
  auto * synth_seed_opt = synth->add_option("--seed", synth_seed, "override the world seed");

  // train
  auto * train = app.add_subcommand("train", "train a model");
  std::string train_data;
  std::string train_out;
  std::string model_file;
  std::string train_file;
  std::string profile = "desk";
  std::int64_t iterations = 0;
  int batch_size = 0;
  std::uint64_t train_seed = 0;
  int train_workers = 1;
  bool resume = false;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run directory")->required();
  train->add_option("--profile", profile, "desk or full")->capture_default_str();
  train->add_option("--model-config", model_file, "model config JSON");
  train->add_option("--train-config", train_file, "train config JSON");
  train->add_option("--iterations", iterations, "override iterations");
  train->add_option("--batch-size", batch_size, "override batch size");
  auto * train_seed_opt = train->add_option("--seed", train_seed, "override the training seed");
  train->add_option("--workers", train_workers, "parallel batch items (results do not depend on it)")
    ->capture_default_str();
  train->add_flag("--resume", resume, "continue from <out>/latest.ckpt");

  // eval
  auto * eval = app.add_subcommand("eval", "evaluate a checkpoint on the AOIs of a dataset");
  EvalFlags eval_flags;
  eval_flags.add(eval);
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint file");
  std::string baseline;
  eval->add_option("--baseline", baseline, "evaluate a reference predictor instead (cv)");
  int baseline_modes = 6;
  eval->add_option("--modes", baseline_modes, "modes of the reference predictor")->capture_default_str();

  // sweep
  auto * sweep = app.add_subcommand("sweep", "evaluate over a grid of theta_gt or beta");
  EvalFlags sweep_flags;
  sweep_flags.add(sweep);
  sweep->add_option("--checkpoint", sweep_flags.checkpoint, "checkpoint file")->required();
  std::string axis = "theta_gt";
  std::string grid_text;
  std::string plot;
  int plot_k = 0;
  sweep->add_option("--axis", axis, "theta_gt or beta")->capture_default_str();
  sweep->add_option("--grid", grid_text, "comma list or start:stop:step")->required();
  sweep->add_option("--plot", plot, "SVG output path");
  sweep->add_option("--plot-k", plot_k, "K shown in the plot (default M)");

  // gradcheck
  auto * gradcheck = app.add_subcommand("gradcheck", "run the gradient-check suite");
  std::string gc_profile = "micro";
  bool inject_fault = false;
  double gc_tol = 1e-4;
  gradcheck->add_option("--profile", gc_profile, "micro")->capture_default_str();
  gradcheck->add_flag("--inject-fault", inject_fault, "corrupt one backward rule (negative control)");
  gradcheck->add_option("--tolerance", gc_tol, "relative error tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::stderr_color_mt("coop");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (dump_defaults) {
    std::cout << defaults_json().dump(2) << std::endl;
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }

  if (synth->parsed()) {
    coop::WorldSpec spec;
    if (!synth_spec.empty()) {
      spec = coop::world_spec_from_json(read_json(synth_spec));
      manifest.add_input("spec", synth_spec);
    }
    if (synth_n > 0) {
      spec.n_scenes = synth_n;
    }
    spec.seed = resolve_seed(spec.seed, synth_seed_opt, synth_seed);
    spec.validate();
    spdlog::info("generating {} scenes into {}", spec.n_scenes, synth_out);
    coop::write_dataset(spec, synth_out);
    const auto m = coop::read_manifest(synth_out);
    std::size_t bad = coop::load_split(synth_out, m, coop::Split::All).skipped.size();
    if (bad > 0) {
      throw coop::DataError(std::to_string(bad) + " generated scenes failed validation");
    }
    manifest.command = "synth";
    manifest.config = coop::to_json(spec);
    manifest.seed = spec.seed;
    manifest.outputs = {(fs::path(synth_out) / "manifest.json").string()};
    manifest.write(synth_out);
    std::cout << "wrote " << spec.n_scenes << " scenes to " << synth_out << std::endl;
    return kExitOk;
  }

  if (train->parsed()) {
    if (profile != "desk" && profile != "full") {
      throw coop::ConfigError("profile must be desk or full");
    }
    coop::ModelConfig model = profile == "desk" ? coop::ModelConfig::desk() : coop::ModelConfig{};
    coop::TrainConfig tc = profile == "desk" ? coop::TrainConfig::desk() : coop::TrainConfig{};
    if (!model_file.empty()) {
      model = coop::model_config_from_json(read_json(model_file), model);
      manifest.add_input("model_config", model_file);
    }
    if (!train_file.empty()) {
      tc = coop::train_config_from_json(read_json(train_file), tc);
      manifest.add_input("train_config", train_file);
    }
    if (iterations > 0) {
      tc.iterations = iterations;
    }
    if (batch_size > 0) {
      tc.batch_size = batch_size;
    }
    tc.seed = resolve_seed(tc.seed, train_seed_opt, train_seed);
    model.validate();
    tc.validate();
    manifest.add_input("dataset", train_data);
    coop::TrainOptions opts;
    opts.dataset_dir = train_data;
    opts.out_dir = train_out;
    opts.resume = resume;
    opts.workers = train_workers;
    opts.on_log = [](const coop::IterationLog & log) {
      spdlog::info("iter {:>6}  lr {:.3e}  loss {:.4f}  pos {:.4f}  cls {:.4f}", log.iteration + 1, log.lr, log.total,
                   log.l_pos, log.l_class);
    };
    const auto result = coop::train(model, tc, opts);
    manifest.command = "train";
    manifest.config = {{"model", coop::to_json(model)}, {"train", coop::to_json(tc)}, {"workers", train_workers}};
    manifest.seed = tc.seed;
    manifest.outputs = {result.latest_checkpoint, result.best_checkpoint, result.loss_csv};
    manifest.write(train_out);
    std::cout << "trained " << result.iteration << " iterations; best val minFDE " << result.best_val << std::endl;
    return kExitOk;
  }

  if (eval->parsed()) {
    const auto scenes = load_scenes(eval_flags.data, eval_flags.split, eval_flags.limit);
    const coop::EvalConfig config = eval_flags.config();
    coop::MetricsReport report;
    manifest.add_input("dataset", eval_flags.data);
    if (!baseline.empty()) {
      if (baseline != "cv") {
        throw coop::ConfigError("unknown baseline '" + baseline + "' (expected cv)");
      }
      report = coop::evaluate_constant_velocity(scenes, baseline_modes, eval_flags.ks(baseline_modes));
    } else {
      if (eval_flags.checkpoint.empty()) {
        throw coop::ConfigError("--checkpoint is required unless --baseline is given");
      }
      const coop::Checkpoint ck = coop::load_checkpoint(eval_flags.checkpoint);
      manifest.add_input("checkpoint", eval_flags.checkpoint);
      report = coop::evaluate_model(ck.params, ck.model, scenes, config, eval_flags.ks(ck.model.modes), "model",
                                    eval_flags.workers);
    }
    std::ostringstream csv;
    csv << coop::metrics_csv_header() << "\n";
    for (const auto & row : report.rows) {
      csv << coop::metrics_csv_row(row) << "\n";
    }
    std::cout << csv.str();
    fs::create_directories(eval_flags.out_dir);
    const fs::path out = fs::path(eval_flags.out_dir) / "metrics.csv";
    write_text(out, csv.str());
    manifest.command = "eval";
    manifest.config = eval_flags.to_json();
    manifest.seed = config.seed;
    manifest.outputs = {out.string()};
    manifest.write(eval_flags.out_dir);
    return kExitOk;
  }

  if (sweep->parsed()) {
    const auto scenes = load_scenes(sweep_flags.data, sweep_flags.split, sweep_flags.limit);
    const coop::Checkpoint ck = coop::load_checkpoint(sweep_flags.checkpoint);
    const coop::SweepAxis sweep_axis = coop::parse_sweep_axis(axis);
    const auto grid = parse_grid(grid_text);
    const coop::EvalConfig base = sweep_flags.config();
    const auto rows = coop::sweep(ck.params, ck.model, scenes, base, sweep_axis, grid, sweep_flags.ks(ck.model.modes),
                                  sweep_flags.workers);
    std::ostringstream csv;
    csv << coop::metrics_csv_header() << "\n";
    for (const auto & row : rows) {
      csv << coop::metrics_csv_row(row) << "\n";
    }
    std::cout << csv.str();
    fs::create_directories(sweep_flags.out_dir);
    const fs::path out = fs::path(sweep_flags.out_dir) / "sweep.csv";
    write_text(out, csv.str());
    manifest.outputs = {out.string()};
    if (!plot.empty()) {
      write_text(plot, coop::sweep_svg(rows, sweep_axis, plot_k > 0 ? plot_k : ck.model.modes));
      manifest.outputs.push_back(plot);
    }
    manifest.add_input("dataset", sweep_flags.data);
    manifest.add_input("checkpoint", sweep_flags.checkpoint);
    manifest.command = "sweep";
    manifest.config = sweep_flags.to_json();
    manifest.config["axis"] = axis;
    manifest.config["grid"] = grid;
    manifest.seed = base.seed;
    manifest.write(sweep_flags.out_dir);
    return kExitOk;
  }

  if (gradcheck->parsed()) {
    if (gc_profile != "micro") {
      throw coop::ConfigError("only the micro gradcheck profile exists");
    }
    coop::GradcheckSuiteOptions opts;
    opts.tolerance = gc_tol;
    opts.inject_fault = inject_fault;
    const auto start = std::chrono::steady_clock::now();
    const auto reports = coop::run_gradcheck_suite(opts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = true;
    for (const auto & r : reports) {
      std::printf("%-20s %-4s max_rel_error=%.3e checked=%zu\n", r.name.c_str(), r.passed() ? "PASS" : "FAIL",
                  r.max_rel_error, r.checked);
      for (std::size_t i = 0; i < std::min<std::size_t>(r.failures.size(), 3); ++i) {
        std::printf("    %s\n", r.failures[i].c_str());
      }
      ok = ok && r.passed();
    }
    std::printf("gradcheck suite %s in %.1f s\n", ok ? "passed" : "FAILED", secs);
    return ok ? kExitOk : kExitNumeric;
  }
  return kExitUsage;
}
}  // namespace

int main(int argc, char ** argv)
{
  try {
    return run(argc, argv);
  } catch (const coop::ConfigError & e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const coop::NumericError & e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return kExitNumeric;
  } catch (const coop::CoopError & e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const fs::filesystem_error & e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitData;
  }
}

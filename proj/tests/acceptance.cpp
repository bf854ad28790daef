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

// Acceptance gate: one PASS/FAIL line per criterion. Desk training runs are cached under the work directory
// (COOP_ACCEPTANCE_WORK, default <build>/acceptance_work) keyed by a hash of their configuration.
#include "coop/augmentation.hpp"
#include "coop/checkpoint.hpp"
#include "coop/dataset.hpp"
#include "coop/evaluate.hpp"
#include "coop/gradcheck_suite.hpp"
#include "coop/metrics.hpp"
#include "coop/synthetic.hpp"
#include "coop/trainer.hpp"
#include "oracles.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace coop;
using oracle::MatD;
namespace fs = std::filesystem;

namespace
{
struct Outcome
{
  bool pass{false};
  std::string detail;
};

std::string format(const char * fmt, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path work_root()
{
  const char * env = std::getenv("COOP_ACCEPTANCE_WORK");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path(COOP_ACCEPTANCE_WORK);
}

Outcome gradient_suite()
{
  const auto start = std::chrono::steady_clock::now();
  const auto reports = run_gradcheck_suite({});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool ok = secs < 120.0;
  double worst = 0.0;
  std::vector<std::string> required = {"tcn_conv", "lane_conv", "gatv2_fusion", "layer_norm", "head_mlp", "losses"};
  for (const auto & r : reports) {
    ok = ok && r.passed() && r.max_rel_error < 1e-4;
    worst = std::max(worst, r.max_rel_error);
    std::erase(required, r.name);
  }
  ok = ok && required.empty();
  return {ok, format("%zu checks, max relative error %.2e, %.1f s", reports.size(), worst, secs)};
}

Outcome lane_conv_oracle()
{
  ModelConfig config;
  Rng rng(2024);
  double worst = 0.0;
  int graphs = 0;
  std::set<std::string> kinds;
  while (graphs < 50) {
    const auto lanes = oracle::random_lanes(rng, 20, 0.3);
    if (lanes.empty()) {
      continue;
    }
    ++graphs;
    const LaneGraph g = build_lane_graph(lanes, config.lane_dilations);
    for (const auto & e : g.edges) {
      if (!e.pairs.empty()) {
        kinds.insert(e.type.name());
      }
    }
    const int d = 8;
    ad::ParamStore<double> store;
    add_lane_conv_params(store, rng, "lc", d, lane_connection_types(config));
    oracle::perturb(store, rng, 0.1);
    const MatD x = oracle::random_matrix(rng, static_cast<ad::Index>(g.nodes.size()), d);
    ad::Tape<double> tape;
    const auto xv = tape.constant(x);
    const MatD dense = oracle::lane_conv_dense(store, "lc", x, g.edges);
    worst = std::max(worst, (lane_conv_aggregate(tape, store, "lc", xv, g.edges).value() - dense).cwiseAbs().maxCoeff());
    MatD expected = oracle::layer_norm(dense, store.at("lc.norm.gain").value, store.at("lc.norm.bias").value);
    expected = x + expected.cwiseMax(0.0);
    worst = std::max(worst, (lane_conv_layer(tape, store, "lc", xv, g.edges).value() - expected).cwiseAbs().maxCoeff());
  }
  const bool all_kinds = kinds.size() == lane_connection_types(config).size();
  return {worst <= 1e-6 && all_kinds,
          format("50 graphs, %zu connection types exercised, max abs error %.2e", kinds.size(), worst)};
}

Outcome dilated_edges()
{
  Rng rng(7);
  const std::vector<int> lane_d{1, 2, 4, 8, 16, 32};
  const std::vector<int> path_d{1, 2, 4, 8};
  int mismatches = 0;
  auto compare = [&](const LaneGraph & g, const std::vector<std::vector<int>> & next) {
    for (const auto & e : g.edges) {
      if (e.type.kind != ConnectionType::Kind::Pred && e.type.kind != ConnectionType::Kind::Succ) {
        continue;
      }
      // BFS frontier of exactly k hops.
      oracle::PairSet expected;
      for (std::size_t u = 0; u < next.size(); ++u) {
        std::set<int> frontier{static_cast<int>(u)};
        for (int h = 0; h < e.type.dilation; ++h) {
          std::set<int> step;
          for (int v : frontier) {
            step.insert(next[static_cast<std::size_t>(v)].begin(), next[static_cast<std::size_t>(v)].end());
          }
          frontier = std::move(step);
        }
        for (int v : frontier) {
          expected.emplace(static_cast<int>(u), v);
        }
      }
      if (e.type.kind == ConnectionType::Kind::Succ) {
        expected = oracle::swapped(expected);
      }
      mismatches += oracle::PairSet(e.pairs.begin(), e.pairs.end()) == expected ? 0 : 1;
    }
  };
  for (int trial = 0; trial < 100; ++trial) {
    const auto lanes = oracle::random_lanes(rng, 40, 0.3);
    if (!lanes.empty()) {
      compare(build_lane_graph(lanes, lane_d), oracle::lane_segment_successors(lanes));
    }
    const auto paths = oracle::random_paths(rng, 4, 40);
    compare(build_path_graph(paths, std::vector<int>(paths.size(), 0), path_d), oracle::path_point_successors(paths));
  }
  return {mismatches == 0, format("100 lane + 100 path graphs, %d mismatching edge sets", mismatches)};
}

Outcome attention_normalization()
{
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool timed = trial % 2 == 0;
    const int heads = 1 << (trial % 3);
    const int d = 16;
    ad::ParamStore<double> store;
    add_gatv2_params(store, rng, "g", d, heads, timed ? 4 : 3);
    oracle::perturb(store, rng, 0.3);
    const int n_src = 1 + static_cast<int>(uniform_index(rng, 12));
    const int n_dst = 1 + static_cast<int>(uniform_index(rng, 12));
    const CrossEdges edges = oracle::random_bipartite(rng, n_src, n_dst, timed);
    if (edges.size() == 0) {
      continue;
    }
    ad::Tape<double> tape;
    ad::Var<double> alpha;
    gatv2_layer(tape, store, "g", tape.constant(oracle::random_matrix(rng, n_dst, d, 2.0)),
                tape.constant(oracle::random_matrix(rng, n_src, d, 2.0)), edges, heads, 0.1, &alpha);
    MatD sums = MatD::Zero(n_dst, heads);
    std::vector<bool> has_edge(static_cast<std::size_t>(n_dst), false);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      sums.row(edges.dst[e]) += alpha.value().row(static_cast<ad::Index>(e));
      has_edge[static_cast<std::size_t>(edges.dst[e])] = true;
    }
    for (int i = 0; i < n_dst; ++i) {
      if (has_edge[static_cast<std::size_t>(i)]) {
        worst = std::max(worst, (sums.row(i).array() - 1.0).abs().maxCoeff());
      }
    }
  }
  return {worst <= 1e-6, format("100 bipartite graphs, max |sum - 1| = %.2e", worst)};
}

Outcome augmentation()
{
  bool identity = true;
  WorldSpec spec;
  spec.seed = 31;
  for (std::size_t i = 0; i < 100; ++i) {
    const Scene s = generate_scene(spec, i).scene;
    for (const auto & a : s.actors) {
      if (a.future_gt && a.current() != nullptr) {
        identity = identity && scale_trajectory(*a.future_gt, *a.current(), 1.0, s.horizon) == *a.future_gt;
      }
    }
  }

  Rng rng(5);
  double worst_spacing = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const ActorState anchor{0, {0.0, 0.0}, true};
    Trajectory f;
    Vec2 p{};
    double heading = uniform(rng, -3.14, 3.14);
    for (int t = 1; t <= 30; ++t) {
      heading += uniform(rng, -0.08, 0.08);
      p += Vec2{std::cos(heading), std::sin(heading)} * uniform(rng, 0.0, 2.5);
      f.states.push_back({t, p, true});
    }
    const Trajectory scaled = scale_trajectory(f, anchor, uniform(rng, kMinTrainingBeta, kMaxBeta), 30);
    const Path path = trajectory_to_path(scaled, anchor);
    Vec2 prev = anchor.pos;
    for (std::size_t k = 0; k + 1 < path.points.size(); ++k) {
      worst_spacing = std::max(worst_spacing, std::abs(distance(prev, path.points[k]) - kPathInterval));
      prev = path.points[k];
    }
    if (!path.points.empty() && distance(prev, path.points.back()) > kPathInterval + 1e-6) {
      worst_spacing = std::max(worst_spacing, distance(prev, path.points.back()) - kPathInterval);
    }
  }

  int count_failures = 0;
  for (std::size_t n = 0; n <= 10; ++n) {
    for (int step = 0; step <= 100; ++step) {
      const double theta = step / 100.0;
      const auto expected = static_cast<std::size_t>(std::floor(static_cast<double>(n) * theta + 0.5));
      Scene s;
      s.id = "count";
      s.horizon = 2;
      for (std::size_t i = 0; i <= n; ++i) {
        Actor a;
        a.id = "a" + std::to_string(i);
        a.history.states = {{0, {0.0, 4.0 * static_cast<double>(i)}, true}};
        a.future_gt = Trajectory{{{1, {1.0, 4.0 * static_cast<double>(i)}, true}, {2, {2.0, 4.0 * static_cast<double>(i)}, true}}};
        s.actors.push_back(a);
      }
      s.aoi_id = "a0";
      Rng role_rng(n * 1000 + static_cast<std::size_t>(step));
      const auto roles = sample_roles(s, 1.0, theta, true, role_rng);
      count_failures += full_trajectory_count(n, theta) == expected && roles.count(CoopRole::FullTrajectory) == expected
                          ? 0
                          : 1;
    }
  }
  return {identity && worst_spacing <= 1e-6 && count_failures == 0,
          format("beta=1 identity %s; max spacing error %.2e m; %d of 1111 rounding cases wrong",
                 identity ? "exact" : "BROKEN", worst_spacing, count_failures)};
}

Outcome metric_oracles()
{
  Rng rng(1000);
  int mismatches = 0;
  std::vector<double> fdes;
  int oracle_misses = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int modes = 1 + static_cast<int>(uniform_index(rng, 6));
    const int horizon = 1 + static_cast<int>(uniform_index(rng, 30));
    ActorPrediction p;
    p.modes.resize(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
      for (int t = 0; t < horizon; ++t) {
        p.modes[static_cast<std::size_t>(m)].push_back({uniform(rng, -5, 5), uniform(rng, -5, 5)});
      }
      p.probabilities.push_back(static_cast<double>(uniform_index(rng, 5)));
    }
    p.logits = p.probabilities;
    Trajectory gt;
    for (int t = 1; t <= horizon; ++t) {
      gt.states.push_back({t, {uniform(rng, -5, 5), uniform(rng, -5, 5)}, t == horizon || uniform01(rng) < 0.7});
    }
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(modes)));
    // Brute force: a mode is in the top K when fewer than K modes outrank it.
    double fde = INFINITY;
    double ade = INFINITY;
    for (int m = 0; m < modes; ++m) {
      int outranked = 0;
      for (int j = 0; j < modes; ++j) {
        const double pj = p.probabilities[static_cast<std::size_t>(j)];
        const double pm = p.probabilities[static_cast<std::size_t>(m)];
        outranked += pj > pm || (pj == pm && j < m) ? 1 : 0;
      }
      if (outranked >= k) {
        continue;
      }
      const auto & mode = p.modes[static_cast<std::size_t>(m)];
      fde = std::min(fde, std::hypot(mode.back().x - gt.states.back().pos.x, mode.back().y - gt.states.back().pos.y));
      double sum = 0.0;
      int n = 0;
      for (const auto & s : gt.states) {
        if (s.valid) {
          const auto & q = mode[static_cast<std::size_t>(s.t - 1)];
          sum += std::hypot(q.x - s.pos.x, q.y - s.pos.y);
          ++n;
        }
      }
      ade = std::min(ade, sum / n);
    }
    mismatches += min_fde(p, gt, k) == fde && min_ade(p, gt, k) == ade ? 0 : 1;
    fdes.push_back(fde);
    oracle_misses += fde > 2.0 ? 1 : 0;
  }
  const bool mr_ok = miss_rate(fdes) == oracle_misses / 1000.0;
  const bool boundary = miss_rate({2.0}) == 0.0 && miss_rate({std::nextafter(2.0, 3.0)}) == 1.0;
  return {mismatches == 0 && mr_ok && boundary,
          format("%d of 1000 pairs differ from brute force; MR %s; 2.0 m %s", mismatches, mr_ok ? "exact" : "differs",
                 boundary ? "is a hit" : "is a miss")};
}

Outcome overfit()
{
  TrainConfig t = TrainConfig::desk();
  t.iterations = 500;
  t.batch_size = 1;
  t.theta_gt = 0.0;
  t.theta_type = 0.0;
  Trainer trainer(ModelConfig::desk(), t, {make_micro_scene()});
  double loss = INFINITY;
  std::int64_t reached = -1;
  for (int i = 0; i < 500; ++i) {
    loss = trainer.step().total;
    if (loss < 0.05 && reached < 0) {
      reached = i + 1;
    }
  }
  return {reached > 0, format("loss %.4f after 500 iterations, first below 0.05 at iteration %lld", loss,
                              static_cast<long long>(reached))};
}

// ---------------------------------------------------------------------------------------------------------------
// Desk experiment

struct SeedResult
{
  std::uint64_t seed{0};
  double cv{0.0};
  std::map<std::string, double> fde;  //!< minFDE@6 per evaluated configuration
};

struct DeskExperiment
{
  std::vector<SeedResult> seeds;
  std::string error;
};

std::string config_hash(const nlohmann::json & j)
{
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h = (h ^ c) * 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DeskExperiment run_desk_experiment()
{
  DeskExperiment out;
  try {
    WorldSpec world;
    world.n_scenes = 2000;
    const ModelConfig model = ModelConfig::desk();
    const TrainConfig base = TrainConfig::desk();
    const fs::path root =
      work_root() / config_hash({{"world", to_json(world)}, {"model", to_json(model)}, {"train", to_json(base)}});
    const fs::path data = root / "data";
    if (!fs::exists(data / "manifest.json")) {
      std::printf("generating %zu scenes into %s\n", world.n_scenes, data.c_str());
      write_dataset(world, data.string());
    }
    const DatasetManifest manifest = read_manifest(data.string());
    std::vector<Scene> val = load_split(data.string(), manifest, Split::Val).scenes;
    const MetricsReport cv = evaluate_constant_velocity(val, model.modes, {model.modes});

    for (std::uint64_t seed : {1, 2, 3}) {
      TrainConfig tc = base;
      tc.seed = seed;
      const fs::path run = root / ("seed" + std::to_string(seed));
      const fs::path latest = run / "latest.ckpt";
      if (!fs::exists(latest) || load_checkpoint(latest.string()).iteration < tc.iterations) {
        std::printf("training seed %llu into %s (resumable)\n", static_cast<unsigned long long>(seed), run.c_str());
        std::fflush(stdout);
        TrainOptions opts;
        opts.dataset_dir = data.string();
        opts.out_dir = run.string();
        opts.resume = true;
        train(model, tc, opts);
      }
      const Checkpoint ck = load_checkpoint(latest.string());
      SeedResult r;
      r.seed = seed;
      r.cv = cv.row(model.modes).min_fde;
      auto eval = [&](const std::string & name, double theta_gt, double theta_type, bool aoi, double beta) {
        EvalConfig c;
        c.theta_gt = theta_gt;
        c.theta_type = theta_type;
        c.theta_aoi = aoi;
        c.beta = beta;
        r.fde[name] = evaluate_model(ck.params, ck.model, val, c, {model.modes}).row(model.modes).min_fde;
      };
      eval("I", 0.0, 0.0, false, 1.0);
      eval("III", 1.0, 1.0, false, 1.0);
      eval("IV", 0.0, 0.0, true, 1.0);
      for (double beta : {0.1, 0.5, 1.5}) {
        eval(format("IV beta=%.1f", beta), 0.0, 0.0, true, beta);
      }
      r.fde["IV beta=1.0"] = r.fde["IV"];
      out.seeds.push_back(r);
    }

    std::ofstream csv(root / "results.csv");
    csv << "seed,config,minFDE6\n";
    for (const auto & r : out.seeds) {
      csv << r.seed << ",constant_velocity," << r.cv << "\n";
      for (const auto & [name, v] : r.fde) {
        csv << r.seed << "," << name << "," << v << "\n";
      }
    }
  } catch (const std::exception & e) {
    out.error = e.what();
  }
  return out;
}

Outcome count_seeds(const DeskExperiment & x, const std::function<bool(const SeedResult &)> & holds,
                    const std::function<std::string(const SeedResult &)> & describe)
{
  if (!x.error.empty()) {
    return {false, "desk experiment failed: " + x.error};
  }
  int ok = 0;
  std::string detail;
  for (const auto & r : x.seeds) {
    const bool h = holds(r);
    ok += h ? 1 : 0;
    detail += format("[seed %llu %s: ", static_cast<unsigned long long>(r.seed), h ? "ok" : "no") + describe(r) + "] ";
  }
  return {ok >= 2, format("%d/3 seeds ", ok) + detail};
}

// ---------------------------------------------------------------------------------------------------------------
// Determinism

int run_cli(const std::string & args)
{
  const std::string cmd = std::string(COOP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism()
{
  const fs::path root = work_root() / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = (root / "data").string();
  if (run_cli("synth --out " + data + " --n-scenes 40 --seed 11") != 0) {
    return {false, "synth failed"};
  }
  for (const char * run : {"a", "b"}) {
    if (run_cli("train --data " + data + " --out " + (root / run).string() +
                " --iterations 30 --batch-size 4 --seed 5 --workers 1") != 0) {
      return {false, "train failed"};
    }
  }
  const bool same_ckpt = slurp(root / "a" / "latest.ckpt") == slurp(root / "b" / "latest.ckpt") &&
                         slurp(root / "a" / "best.ckpt") == slurp(root / "b" / "best.ckpt");
  const bool same_curve = slurp(root / "a" / "loss.csv") == slurp(root / "b" / "loss.csv");

  const Checkpoint ck = load_checkpoint((root / "a" / "latest.ckpt").string());
  save_checkpoint(ck, (root / "resaved.ckpt").string());
  const bool same_bytes = slurp(root / "resaved.ckpt") == slurp(root / "a" / "latest.ckpt");
  const Checkpoint back = load_checkpoint((root / "resaved.ckpt").string());
  const auto scenes = load_split(data, read_manifest(data), Split::Val).scenes;
  EvalConfig c;
  c.theta_gt = 0.5;
  c.theta_type = 0.5;
  c.theta_aoi = true;
  const auto a = evaluate_model(ck.params, ck.model, scenes, c, {1, ck.model.modes});
  const auto b = evaluate_model(back.params, back.model, scenes, c, {1, ck.model.modes});
  const bool same_eval = a.min_fde == b.min_fde && a.min_ade == b.min_ade;
  return {same_ckpt && same_curve && same_bytes && same_eval,
          format("checkpoints %s, loss curves %s, re-save %s, reloaded eval %s", same_ckpt ? "identical" : "DIFFER",
                 same_curve ? "identical" : "DIFFER", same_bytes ? "identical" : "DIFFERS",
                 same_eval ? "identical" : "DIFFERS")};
}
}  // namespace

int main()
{
  spdlog::set_level(spdlog::level::warn);
  int failures = 0;
  auto report = [&](int id, const char * name, const Outcome & o) {
    std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  };
  report(1, "gradient suite", gradient_suite());
  report(2, "lane convolution oracle", lane_conv_oracle());
  report(3, "dilated edge oracle", dilated_edges());
  report(4, "attention normalization", attention_normalization());
  report(5, "augmentation", augmentation());
  report(6, "metric oracles", metric_oracles());
  report(7, "overfit sanity", overfit());

  spdlog::set_level(spdlog::level::info);
  const DeskExperiment desk = run_desk_experiment();
  spdlog::set_level(spdlog::level::warn);
  const Outcome beats_cv = count_seeds(
    desk, [](const SeedResult & r) { return r.fde.at("I") <= 0.8 * r.cv; },
    [](const SeedResult & r) { return format("I %.3f vs CV %.3f", r.fde.at("I"), r.cv); });
  const Outcome aoi = count_seeds(
    desk, [](const SeedResult & r) { return r.fde.at("IV") < r.fde.at("I"); },
    [](const SeedResult & r) { return format("IV %.3f vs I %.3f", r.fde.at("IV"), r.fde.at("I")); });
  const Outcome coop = count_seeds(
    desk, [](const SeedResult & r) { return r.fde.at("III") < r.fde.at("I"); },
    [](const SeedResult & r) { return format("III %.3f vs I %.3f", r.fde.at("III"), r.fde.at("I")); });
  report(8, "desk experiment",
         {beats_cv.pass && aoi.pass && coop.pass,
          "(a) " + beats_cv.detail + "\n            (b) " + aoi.detail + "\n            (c) " + coop.detail});
  report(9, "beta robustness",
         count_seeds(
           desk,
           [](const SeedResult & r) {
             const double ref = r.fde.at("I");
             return r.fde.at("IV beta=1.0") < r.fde.at("IV beta=0.1") && r.fde.at("IV beta=0.5") < ref &&
                    r.fde.at("IV beta=1.0") < ref && r.fde.at("IV beta=1.5") < ref;
           },
           [](const SeedResult & r) {
             return format("beta 0.1/0.5/1.0/1.5 = %.3f/%.3f/%.3f/%.3f, ref %.3f", r.fde.at("IV beta=0.1"),
                           r.fde.at("IV beta=0.5"), r.fde.at("IV beta=1.0"), r.fde.at("IV beta=1.5"), r.fde.at("I"));
           }));
  report(10, "determinism", determinism());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

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

#include "coop/trainer.hpp"

#include "coop/dataset.hpp"
#include "coop/errors.hpp"
#include "coop/evaluate.hpp"
#include "coop/loss.hpp"
#include "coop/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace coop
{
namespace fs = std::filesystem;

namespace
{
constexpr std::uint64_t kRoleStream = 0x726f6c65;
constexpr std::uint64_t kEpochStream = 0x65706f63;

bool has_valid_future(const Actor & a, int horizon)
{
  if (!a.future_gt) {
    return false;
  }
  return std::any_of(a.future_gt->states.begin(), a.future_gt->states.end(),
                     [&](const ActorState & s) { return s.valid && s.t >= 1 && s.t <= horizon; });
}

std::string csv_line(const IterationLog & log)
{
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g", static_cast<long long>(log.iteration), log.lr, log.total,
                log.l_pos, log.l_class);
  return buf;
}

void check_compatible(const Checkpoint & ck, const ModelConfig & model, const TrainConfig & train)
{
  if (to_json(ck.model) != to_json(model)) {
    throw ConfigError("checkpoint model config differs from the requested one");
  }
  nlohmann::json a = to_json(ck.train);
  nlohmann::json b = to_json(train);
  if (a != b) {
    throw ConfigError("checkpoint train config differs from the requested one");
  }
}
}  // namespace

AugmentedScene prepare_training_scene(const Scene & scene, const TrainConfig & config, std::int64_t iteration, int slot)
{
  Rng rng(mix_seed({config.seed, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(slot), kRoleStream}));
  const double theta_gt = config.theta_gt < 0.0 ? uniform01(rng) : config.theta_gt;
  const double theta_type = config.theta_type < 0.0 ? uniform01(rng) : config.theta_type;
  CoopAssignment roles = sample_roles(scene, theta_gt, theta_type, false, rng);
  sample_betas(roles, rng, config.beta_min, config.beta_max);
  AugmentedScene aug = apply_assignment(scene, roles);
  std::vector<std::string> keep;
  for (const auto & id : aug.predict_set) {
    const Actor * a = scene.find_actor(id);
    if (a != nullptr && has_valid_future(*a, scene.horizon)) {
      keep.push_back(id);
    }
  }
  aug.predict_set = std::move(keep);
  return aug;
}

Trainer::Trainer(ModelConfig model, TrainConfig train, std::vector<Scene> scenes, int workers)
: model_(std::move(model)), train_(std::move(train)), graph_(model_.graph_config()), workers_(std::max(1, workers))
{
  model_.validate();
  train_.validate();
  if (scenes.empty()) {
    throw EmptyInput("training needs at least one scene");
  }
  scenes_.reserve(scenes.size());
  for (const auto & s : scenes) {
    scenes_.push_back(normalize_frame(s));
  }
  params_ = init_params<float>(model_, train_.seed);
}

void Trainer::restore(const Checkpoint & ck)
{
  check_compatible(ck, model_, train_);
  const auto fresh = init_params<float>(model_, 0);
  if (ck.params.size() != fresh.size()) {
    throw MissingWeight("checkpoint parameter count differs from the model");
  }
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const auto & p = ck.params[i];
    if (p.name != fresh[i].name || p.value.rows() != fresh[i].value.rows() || p.value.cols() != fresh[i].value.cols()) {
      throw MissingWeight("checkpoint parameter '" + p.name + "' does not match the model");
    }
  }
  params_ = ck.params.cast<float>();
  iteration_ = ck.iteration;
}

Checkpoint Trainer::checkpoint(double best_val) const
{
  Checkpoint ck;
  ck.model = model_;
  ck.train = train_;
  ck.params = params_.cast<float>();
  ck.iteration = iteration_;
  ck.best_val = best_val;
  return ck;
}

std::size_t Trainer::scene_for(std::int64_t global_item)
{
  const auto n = static_cast<std::int64_t>(scenes_.size());
  const std::int64_t epoch = global_item / n;
  auto it = permutations_.find(epoch);
  if (it == permutations_.end()) {
    std::vector<std::size_t> perm(scenes_.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed({train_.seed, static_cast<std::uint64_t>(epoch), kEpochStream}));
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    }
    // Only the current and next epoch are ever needed.
    while (!permutations_.empty() && permutations_.begin()->first < epoch) {
      permutations_.erase(permutations_.begin());
    }
    it = permutations_.emplace(epoch, std::move(perm)).first;
  }
  return it->second[static_cast<std::size_t>(global_item % n)];
}

Trainer::ItemResult Trainer::run_item(std::size_t scene_index, int slot) const
{
  ItemResult r;
  const Scene & scene = scenes_[scene_index];
  try {
    const AugmentedScene aug = prepare_training_scene(scene, train_, iteration_, slot);
    if (aug.predict_set.empty()) {
      return r;
    }
    const GraphBundle bundle = build_graph_bundle(aug, graph_);
    ad::Tape<float> tape;
    const ForwardOutput<float> out = forward(tape, params_, model_, bundle);
    std::vector<const Trajectory *> gt;
    for (int idx : out.actors) {
      gt.push_back(&*scene.actors[static_cast<std::size_t>(idx)].future_gt);
    }
    LossResult<float> loss = compute_loss(tape, out, gt, model_.modes, model_.horizon);
    tape.backward(loss.total);
    r.grads = ad::zero_gradients(params_);
    tape.accumulate_param_grads(r.grads);
    r.total = static_cast<double>(loss.total.item());
    r.l_pos = loss.l_pos;
    r.l_class = loss.l_class;
    r.used = true;
  } catch (const DataError & e) {
    spdlog::warn("iteration {} slot {}: skipping scene '{}': {}", iteration_, slot, scene.id, e.what());
  }
  return r;
}

IterationLog Trainer::step()
{
  const int batch = train_.batch_size;
  std::vector<std::size_t> scene_index(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    scene_index[static_cast<std::size_t>(b)] = scene_for(iteration_ * batch + b);
  }
  std::vector<ItemResult> results(static_cast<std::size_t>(batch));
  if (workers_ == 1) {
    for (int b = 0; b < batch; ++b) {
      results[static_cast<std::size_t>(b)] = run_item(scene_index[static_cast<std::size_t>(b)], b);
    }
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers_));
    for (int w = 0; w < workers_; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (int b = w; b < batch; b += workers_) {
            results[static_cast<std::size_t>(b)] = run_item(scene_index[static_cast<std::size_t>(b)], b);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto & t : threads) {
      t.join();
    }
    for (auto & e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
  }

  IterationLog log;
  log.iteration = iteration_;
  log.lr = onecycle_lr(static_cast<double>(iteration_), train_.iterations, train_.max_lr,
                       {train_.warmup_fraction, train_.div_factor, train_.final_div_factor});
  ad::GradientSet<float> grads = ad::zero_gradients(params_);
  for (const auto & r : results) {
    if (!r.used) {
      continue;
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
      grads[i] += r.grads[i];
    }
    log.total += r.total;
    log.l_pos += r.l_pos;
    log.l_class += r.l_class;
    ++log.items;
  }
  if (log.items > 0) {
    const float inv = 1.0f / static_cast<float>(log.items);
    for (auto & g : grads) {
      g *= inv;
    }
    log.total /= log.items;
    log.l_pos /= log.items;
    log.l_class /= log.items;
    adam_step(params_, grads, log.lr);
  }
  ++iteration_;
  return log;
}

TrainResult train(const ModelConfig & model, const TrainConfig & config, const TrainOptions & options)
{
  model.validate();
  config.validate();
  const DatasetManifest manifest = read_manifest(options.dataset_dir);
  LoadedScenes train_split = load_split(options.dataset_dir, manifest, Split::Train);
  LoadedScenes val_split = load_split(options.dataset_dir, manifest, Split::Val);
  TrainResult result;
  result.skipped_scenes = train_split.skipped.size() + val_split.skipped.size();
  auto usable = [&](std::vector<Scene> & scenes) {
    std::vector<Scene> out;
    for (auto & s : scenes) {
      if (s.horizon != model.horizon) {
        spdlog::warn("skipping scene '{}': horizon {} differs from the model's {}", s.id, s.horizon, model.horizon);
        ++result.skipped_scenes;
        continue;
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  std::vector<Scene> train_scenes = usable(train_split.scenes);
  std::vector<Scene> val_scenes = usable(val_split.scenes);
  if (config.val_scenes > 0 && val_scenes.size() > config.val_scenes) {
    val_scenes.resize(config.val_scenes);
  }
  if (train_scenes.empty()) {
    throw EmptyInput("dataset '" + options.dataset_dir + "' has no usable training scenes");
  }
  result.train_scenes = train_scenes.size();

  fs::create_directories(options.out_dir);
  result.latest_checkpoint = (fs::path(options.out_dir) / "latest.ckpt").string();
  result.best_checkpoint = (fs::path(options.out_dir) / "best.ckpt").string();
  result.loss_csv = (fs::path(options.out_dir) / "loss.csv").string();

  Trainer trainer(model, config, std::move(train_scenes), options.workers);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::string> csv_rows;
  if (options.resume && fs::exists(result.latest_checkpoint)) {
    const Checkpoint ck = load_checkpoint(result.latest_checkpoint);
    trainer.restore(ck);
    best_val = ck.best_val;
    std::ifstream in(result.loss_csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && std::stoll(line.substr(0, line.find(','))) < ck.iteration) {
        csv_rows.push_back(line);
      }
    }
    spdlog::info("resuming from iteration {}", ck.iteration);
  } else {
    fs::remove(result.best_checkpoint);
  }
  std::ofstream csv(result.loss_csv, std::ios::trunc);
  csv << "iteration,lr,total,l_pos,l_class\n";
  for (const auto & row : csv_rows) {
    csv << row << "\n";
  }

  EvalConfig val_config;
  val_config.seed = config.seed;
  val_config.k = model.modes;
  auto validate = [&]() {
    if (val_scenes.empty()) {
      return;
    }
    const MetricsReport report =
      evaluate_model(trainer.params(), model, val_scenes, val_config, {model.modes}, "val", options.workers);
    const double v = report.row(model.modes).min_fde;
    spdlog::info("iteration {}: val minFDE@{} = {:.4f}", trainer.iteration(), model.modes, v);
    if (v < best_val) {
      best_val = v;
      save_checkpoint(trainer.checkpoint(best_val), result.best_checkpoint);
    }
  };

  while (trainer.iteration() < config.iterations) {
    const IterationLog log = trainer.step();
    csv << csv_line(log) << "\n";
    const std::int64_t done = trainer.iteration();
    if (options.on_log && (config.log_every == 0 || done % config.log_every == 0 || done == config.iterations)) {
      options.on_log(log);
    }
    if (config.validate_every > 0 && done % config.validate_every == 0 && done < config.iterations) {
      validate();
    }
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < config.iterations) {
      csv.flush();
      save_checkpoint(trainer.checkpoint(best_val), result.latest_checkpoint);
    }
  }
  validate();
  csv.flush();
  save_checkpoint(trainer.checkpoint(best_val), result.latest_checkpoint);
  if (!fs::exists(result.best_checkpoint)) {
    save_checkpoint(trainer.checkpoint(best_val), result.best_checkpoint);
  }
  result.iteration = trainer.iteration();
  result.best_val = best_val;
  return result;
}

}  // namespace coop

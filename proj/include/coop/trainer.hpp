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

#ifndef COOP__TRAINER_HPP_
#define COOP__TRAINER_HPP_

#include "coop/augmentation.hpp"
#include "coop/checkpoint.hpp"
#include "coop/graph.hpp"
#include "coop/network.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coop
{
struct IterationLog
{
  std::int64_t iteration{0};
  double lr{0.0};
  double total{0.0};
  double l_pos{0.0};
  double l_class{0.0};
  int items{0};  //!< Batch items that contributed to the loss
};

/// Training sample for one batch slot: roles from (seed, iteration, slot), betas ~ U[beta_min, beta_max].
/// Actors without any valid future are dropped from the predict set.
AugmentedScene prepare_training_scene(const Scene & normalized, const TrainConfig & config, std::int64_t iteration,
                                      int slot);

/// Optimisation state over an in-memory list of training scenes.
class Trainer
{
public:
  Trainer(ModelConfig model, TrainConfig train, std::vector<Scene> scenes, int workers = 1);

  /// Continues from a checkpoint's parameters, optimizer state and iteration count.
  void restore(const Checkpoint & checkpoint);

  /// One optimizer step on the next batch.
  IterationLog step();

  std::int64_t iteration() const { return iteration_; }
  const ad::ParamStore<float> & params() const { return params_; }
  ad::ParamStore<float> & params() { return params_; }
  const ModelConfig & model_config() const { return model_; }
  const TrainConfig & train_config() const { return train_; }
  Checkpoint checkpoint(double best_val) const;

private:
  struct ItemResult
  {
    ad::GradientSet<float> grads;
    double total{0.0};
    double l_pos{0.0};
    double l_class{0.0};
    bool used{false};
  };

  std::size_t scene_for(std::int64_t global_item);
  ItemResult run_item(std::size_t scene_index, int slot) const;

  ModelConfig model_;
  TrainConfig train_;
  GraphConfig graph_;
  std::vector<Scene> scenes_;  //!< Frame-normalised
  int workers_;
  ad::ParamStore<float> params_;
  std::int64_t iteration_{0};
  std::map<std::int64_t, std::vector<std::size_t>> permutations_;
};

struct TrainOptions
{
  std::string dataset_dir;
  std::string out_dir;
  bool resume{false};
  int workers{1};
  std::function<void(const IterationLog &)> on_log;
};

struct TrainResult
{
  std::int64_t iteration{0};
  std::size_t train_scenes{0};
  std::size_t skipped_scenes{0};
  double best_val{0.0};
  std::string latest_checkpoint;
  std::string best_checkpoint;
  std::string loss_csv;
};

/// Full training run: writes <out>/latest.ckpt, <out>/best.ckpt and <out>/loss.csv.
TrainResult train(const ModelConfig & model, const TrainConfig & config, const TrainOptions & options);

}  // namespace coop

#endif  // COOP__TRAINER_HPP_

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

#ifndef COOP__EVALUATE_HPP_
#define COOP__EVALUATE_HPP_

#include "coop/augmentation.hpp"
#include "coop/network.hpp"
#include "coop/scene.hpp"

#include <map>
#include <string>
#include <vector>

namespace coop
{
struct MetricsRow
{
  std::string label;
  double theta_gt{0.0};
  double theta_type{0.0};
  bool theta_aoi{false};
  double beta{1.0};
  int k{6};
  double min_ade{0.0};
  double min_fde{0.0};
  double miss_rate{0.0};
  std::size_t n_scenes{0};
};

struct MetricsReport
{
  std::vector<MetricsRow> rows;  //!< One per K
  std::vector<std::string> scene_ids;  //!< Sorted; per-scene vectors follow this order
  std::map<int, std::vector<double>> min_ade;
  std::map<int, std::vector<double>> min_fde;

  const MetricsRow & row(int k) const;
};

/// Eval-time roles: AOI excluded from theta_gt sampling, all cooperative betas fixed to config.beta,
/// the AOI transmits its path when theta_aoi is set. Roles depend only on (seed, scene id).
/// Only the AOI is predicted.
AugmentedScene prepare_eval_scene(const Scene & normalized, const EvalConfig & config);

/// Metrics over the AOIs of `scenes` (raw scenes; frames are normalised internally).
MetricsReport evaluate_model(const ad::ParamStore<float> & params, const ModelConfig & model,
                             const std::vector<Scene> & scenes, const EvalConfig & config,
                             const std::vector<int> & ks, const std::string & label = "model", int workers = 1);

MetricsReport evaluate_constant_velocity(const std::vector<Scene> & scenes, int modes, const std::vector<int> & ks,
                                         const std::string & label = "constant_velocity");

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow & row);

enum class SweepAxis { ThetaGt, Beta };

SweepAxis parse_sweep_axis(const std::string & name);
const char * to_string(SweepAxis axis);

/// One evaluate_model per grid value; rows ordered by grid value, then K.
std::vector<MetricsRow> sweep(const ad::ParamStore<float> & params, const ModelConfig & model,
                              const std::vector<Scene> & scenes, const EvalConfig & base, SweepAxis axis,
                              const std::vector<double> & grid, const std::vector<int> & ks, int workers = 1);

/// Line plot of minFDE (and minADE) against the swept value for one K.
std::string sweep_svg(const std::vector<MetricsRow> & rows, SweepAxis axis, int k);

}  // namespace coop

#endif  // COOP__EVALUATE_HPP_

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

#ifndef COOP__SYNTHETIC_HPP_
#define COOP__SYNTHETIC_HPP_

#include "coop/network.hpp"
#include "coop/rng.hpp"
#include "coop/scene.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace coop
{
enum class Topology { Straight, Curve, Intersection, Merge };

const char * to_string(Topology t);

struct WorldSpec
{
  std::size_t n_scenes{2000};
  /// Probabilities of straight, curve, intersection, merge.
  std::array<double, 4> topology_mix{0.2, 0.2, 0.4, 0.2};
  int min_actors{3};
  int max_actors{6};
  double min_speed{2.0};  //!< Initial speed range, m/s.
  double max_speed{10.0};
  double speed_limit{20.0};
  double max_accel{3.0};
  double jerk_std{4.0};  //!< m/s^3 of the acceleration random walk.
  double brake_prob{0.3};  //!< Chance an independent actor brakes to a stop during the horizon.
  double coupling_prob{0.5};
  int follower_delay{10};  //!< Steps between a leader's and its follower's speed profile.
  double branch_ambiguity{0.5};
  double point_spacing{2.5};
  int history_steps{kDefaultHistorySteps};
  int horizon{kDefaultHorizon};
  double dt{kDefaultDt};
  std::uint64_t seed{1};

  void validate() const;
};

nlohmann::json to_json(const WorldSpec & spec);
WorldSpec world_spec_from_json(const nlohmann::json & j, const WorldSpec & base = {});

struct GeneratedMap
{
  Topology topology{Topology::Straight};
  std::vector<LaneSegment> lanes;
};

GeneratedMap generate_map(const WorldSpec & spec, Rng & rng);

/// Per-actor simulation bookkeeping, kept for tests.
struct SimulatedActor
{
  Actor actor;
  std::vector<std::string> route;
  int leader{-1};  //!< Index of the coupled leader, or -1.
  std::vector<double> speed;  //!< Per simulated step, oldest first.
};

struct SimulatedScene
{
  Scene scene;
  Topology topology{Topology::Straight};
  std::vector<SimulatedActor> actors;
};

/// Actors moving along lane centerlines; chooses the AOI among actors with a full future.
SimulatedScene simulate_actors(const GeneratedMap & map, const WorldSpec & spec, Rng & rng,
                               const std::string & scene_id = "scene");

/// Scene `index` of the world described by `spec`.
SimulatedScene generate_scene(const WorldSpec & spec, std::size_t index);

/// M identical modes continuing the AOI's last history displacement, uniform probabilities.
/// With a single valid history state the modes hold position, or DegenerateHistory is thrown when `strict`.
PredictionSet constant_velocity_baseline(const Scene & scene, int modes, bool strict = false);

/// Two actors on a two-lane straight road: "ego" (AOI, accelerating gently) and "lead" ahead of it.
Scene make_micro_scene(int history_steps = kDefaultHistorySteps, int horizon = kDefaultHorizon);

/// Writes scene files plus manifest.json (80/20 train/val split by index).
void write_dataset(const WorldSpec & spec, const std::string & dir);

}  // namespace coop

#endif  // COOP__SYNTHETIC_HPP_

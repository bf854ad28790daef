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

#ifndef COOP__AUGMENTATION_HPP_
#define COOP__AUGMENTATION_HPP_

#include "coop/rng.hpp"
#include "coop/scene.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace coop
{
enum class CoopRole { None, PathOnly, FullTrajectory };

const char * to_string(CoopRole role);

struct CoopAssignment
{
  std::map<std::string, CoopRole> roles;
  std::map<std::string, double> beta;  //!< Speed factor per cooperative actor.
  double theta_gt_used{0.0};
  double theta_type_used{0.0};

  CoopRole role_of(const std::string & actor_id) const;
  std::size_t count(CoopRole role) const;
};

struct AugmentedScene
{
  Scene base;
  CoopAssignment assignment;
  std::map<std::string, Trajectory> coop_trajectories;  //!< FullTrajectory actors
  std::map<std::string, Path> coop_paths;               //!< PathOnly actors
  std::vector<std::string> predict_set;                 //!< Scene order, FullTrajectory removed
};

inline constexpr double kPathInterval = 2.0;
inline constexpr double kMinTrainingBeta = 0.05;
inline constexpr double kMaxBeta = 2.0;

/// Number of cooperative actors that transmit full trajectories: floor(n * theta_type + 1/2).
std::size_t full_trajectory_count(std::size_t n_cooperative, double theta_type);

/// Actors with at least `min_future_states` valid future states (AOI dropped when `exclude_aoi`).
/// A negative `min_future_states` means the scene horizon.
std::vector<std::string> eligible_actors(
  const Scene & scene, bool exclude_aoi, int min_future_states = -1);

/// Marks round(|eligible| * theta_gt) actors cooperative, chosen uniformly without replacement,
/// then gives floor(N * theta_type + 1/2) of them full trajectories. All betas start at 1.
CoopAssignment sample_roles(
  const Scene & scene, double theta_gt, double theta_type, bool exclude_aoi, Rng & rng,
  int min_future_states = -1);

/// Draws an independent beta ~ U[lo, hi] for every cooperative actor, in actor-id order.
void sample_betas(CoopAssignment & assignment, Rng & rng, double lo = kMinTrainingBeta,
                  double hi = kMaxBeta);

/// Retimes a ground-truth future: output step j is the position at continuous time beta * j,
/// interpolated over [anchor, future] and linearly extrapolated past the last state.
Trajectory scale_trajectory(
  const Trajectory & future, const ActorState & anchor, double beta, int horizon);

/// Resamples the polyline anchor -> states into points `interval` meters apart (anchor excluded).
/// The endpoint closes the path when the remainder is shorter than `interval`.
/// Returns an empty path when the polyline has zero length.
Path trajectory_to_path(
  const Trajectory & scaled_future, const ActorState & anchor, double interval = kPathInterval);

AugmentedScene apply_assignment(const Scene & scene, const CoopAssignment & assignment);

}  // namespace coop

#endif  // COOP__AUGMENTATION_HPP_

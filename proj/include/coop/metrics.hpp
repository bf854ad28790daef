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

#ifndef COOP__METRICS_HPP_
#define COOP__METRICS_HPP_

#include "coop/network.hpp"
#include "coop/scene.hpp"

#include <vector>

namespace coop
{
inline constexpr double kMissThreshold = 2.0;

/// Indices of the K most probable modes, ties broken by lower index.
std::vector<int> top_k_modes(const std::vector<double> & probabilities, int k);

/// Minimum endpoint distance over the top-K modes; the ground truth must be valid at t = H.
double min_fde(const ActorPrediction & prediction, const Trajectory & ground_truth, int k);

/// Minimum over the top-K modes of the mean distance over valid ground-truth steps.
double min_ade(const ActorPrediction & prediction, const Trajectory & ground_truth, int k);

/// Fraction of values above `threshold`; a value equal to the threshold is a hit.
double miss_rate(const std::vector<double> & min_fde_values, double threshold = kMissThreshold);

}  // namespace coop

#endif  // COOP__METRICS_HPP_

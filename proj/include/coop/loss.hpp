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

#ifndef COOP__LOSS_HPP_
#define COOP__LOSS_HPP_

#include "coop/network.hpp"
#include "coop/scene.hpp"

#include <vector>

namespace coop
{
template <typename T>
struct LossResult
{
  ad::Var<T> total;
  double l_pos{0.0};
  double l_class{0.0};
  std::vector<int> winners;  //!< Winning mode per predicted actor.
};

/// Winner-takes-all smooth-L1 regression plus hard-label cross-entropy.
/// `ground_truth[i]` is the future of `out.actors[i]` in the bundle frame (states t = 1..H).
template <typename T>
LossResult<T> compute_loss(ad::Tape<T> & tape, const ForwardOutput<T> & out,
                           const std::vector<const Trajectory *> & ground_truth, int modes, int horizon);

/// Lowest-index argmin of the endpoint error at the last valid ground-truth step.
/// `trajectory` holds modes*horizon*2 values laid out as in ForwardOutput.
int winning_mode(const double * trajectory, const Trajectory & ground_truth, int modes, int horizon);

}  // namespace coop

#endif  // COOP__LOSS_HPP_

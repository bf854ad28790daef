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

#include "coop/loss.hpp"

#include "coop/errors.hpp"

#include <cmath>
#include <limits>

namespace coop
{
namespace
{
std::vector<int> valid_steps(const Trajectory & gt, int horizon)
{
  std::vector<int> steps;
  for (const auto & s : gt.states) {
    if (s.valid && s.t >= 1 && s.t <= horizon) {
      steps.push_back(s.t);
    }
  }
  return steps;
}
}  // namespace

int winning_mode(const double * trajectory, const Trajectory & gt, int modes, int horizon)
{
  const auto steps = valid_steps(gt, horizon);
  if (steps.empty()) {
    throw NoValidGroundTruth("ground truth has no valid future state");
  }
  const int t = steps.back();
  const Vec2 target = gt.at(t)->pos;
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int m = 0; m < modes; ++m) {
    const std::size_t c = (static_cast<std::size_t>(m) * horizon + (t - 1)) * 2;
    const double err = std::hypot(trajectory[c] - target.x, trajectory[c + 1] - target.y);
    if (err < best_err) {
      best_err = err;
      best = m;
    }
  }
  return best;
}

template <typename T>
LossResult<T> compute_loss(ad::Tape<T> & tape, const ForwardOutput<T> & out,
                           const std::vector<const Trajectory *> & ground_truth, int modes, int horizon)
{
  const ad::Matrix<T> & pred = out.trajectories.value();
  const ad::Index n = pred.rows();
  if (static_cast<ad::Index>(ground_truth.size()) != n || n == 0) {
    throw ShapeMismatch("compute_loss: need one ground-truth future per predicted actor");
  }
  const ad::Index cols = pred.cols();
  ad::Matrix<T> target = pred;
  ad::Matrix<T> weights = ad::Matrix<T>::Zero(n, cols);
  LossResult<T> result;
  std::vector<double> row(static_cast<std::size_t>(cols));
  for (ad::Index i = 0; i < n; ++i) {
    const Trajectory * gt = ground_truth[static_cast<std::size_t>(i)];
    if (gt == nullptr) {
      throw NoValidGroundTruth("predicted actor without ground truth");
    }
    for (ad::Index c = 0; c < cols; ++c) {
      row[static_cast<std::size_t>(c)] = static_cast<double>(pred(i, c));
    }
    const int m = winning_mode(row.data(), *gt, modes, horizon);
    result.winners.push_back(m);
    const auto steps = valid_steps(*gt, horizon);
    const T w = T(1) / static_cast<T>(static_cast<double>(n) * 2.0 * static_cast<double>(steps.size()));
    for (int t : steps) {
      const ad::Index c = (static_cast<ad::Index>(m) * horizon + (t - 1)) * 2;
      const Vec2 p = gt->at(t)->pos;
      target(i, c) = static_cast<T>(p.x);
      target(i, c + 1) = static_cast<T>(p.y);
      weights(i, c) = w;
      weights(i, c + 1) = w;
    }
  }
  ad::Var<T> l_pos = ad::smooth_l1(ad::sub(out.trajectories, tape.constant(std::move(target))), weights);
  ad::Var<T> l_class = ad::cross_entropy_with_logits(out.logits, result.winners);
  result.l_pos = static_cast<double>(l_pos.item());
  result.l_class = static_cast<double>(l_class.item());
  result.total = ad::add(l_pos, l_class);
  return result;
}

template LossResult<float> compute_loss<float>(ad::Tape<float> &, const ForwardOutput<float> &,
                                               const std::vector<const Trajectory *> &, int, int);
template LossResult<double> compute_loss<double>(ad::Tape<double> &, const ForwardOutput<double> &,
                                                 const std::vector<const Trajectory *> &, int, int);

}  // namespace coop

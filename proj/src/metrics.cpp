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

#include "coop/metrics.hpp"

#include "coop/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace coop
{
namespace
{
void check_k(const ActorPrediction & p, int k)
{
  if (k < 1 || k > static_cast<int>(p.modes.size())) {
    throw InvalidK("K=" + std::to_string(k) + " outside [1, " + std::to_string(p.modes.size()) + "]");
  }
  if (p.probabilities.size() != p.modes.size()) {
    throw ShapeMismatch("prediction has " + std::to_string(p.probabilities.size()) + " probabilities for " +
                        std::to_string(p.modes.size()) + " modes");
  }
}

const Vec2 & mode_point(const ActorPrediction & p, int m, int t)
{
  const auto & mode = p.modes[static_cast<std::size_t>(m)];
  if (t < 1 || t > static_cast<int>(mode.size())) {
    throw ShapeMismatch("ground-truth step " + std::to_string(t) + " beyond the predicted horizon");
  }
  return mode[static_cast<std::size_t>(t - 1)];
}
}  // namespace

std::vector<int> top_k_modes(const std::vector<double> & probabilities, int k)
{
  if (k < 1 || k > static_cast<int>(probabilities.size())) {
    throw InvalidK("K=" + std::to_string(k) + " outside [1, " + std::to_string(probabilities.size()) + "]");
  }
  std::vector<int> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probabilities[static_cast<std::size_t>(a)] > probabilities[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

double min_fde(const ActorPrediction & p, const Trajectory & gt, int k)
{
  check_k(p, k);
  const int horizon = static_cast<int>(p.modes.front().size());
  const ActorState * end = gt.at(horizon);
  if (end == nullptr || !end->valid) {
    throw MissingFuture("ground truth has no valid endpoint at t=" + std::to_string(horizon));
  }
  double best = std::numeric_limits<double>::infinity();
  for (int m : top_k_modes(p.probabilities, k)) {
    best = std::min(best, distance(mode_point(p, m, horizon), end->pos));
  }
  return best;
}

double min_ade(const ActorPrediction & p, const Trajectory & gt, int k)
{
  check_k(p, k);
  std::vector<const ActorState *> steps;
  for (const auto & s : gt.states) {
    if (s.valid && s.t >= 1) {
      steps.push_back(&s);
    }
  }
  if (steps.empty()) {
    throw NoValidGroundTruth("ground truth has no valid future state");
  }
  double best = std::numeric_limits<double>::infinity();
  for (int m : top_k_modes(p.probabilities, k)) {
    double total = 0.0;
    for (const ActorState * s : steps) {
      total += distance(mode_point(p, m, s->t), s->pos);
    }
    best = std::min(best, total / static_cast<double>(steps.size()));
  }
  return best;
}

double miss_rate(const std::vector<double> & values, double threshold)
{
  if (values.empty()) {
    throw EmptyInput("miss rate of an empty list");
  }
  const auto misses = std::count_if(values.begin(), values.end(), [&](double v) { return v > threshold; });
  return static_cast<double>(misses) / static_cast<double>(values.size());
}

}  // namespace coop

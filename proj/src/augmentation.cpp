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

#include "coop/augmentation.hpp"

#include "coop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace coop
{
namespace
{
// Guards against 0.01-grid fractions landing a hair below an exact .5 tie.
constexpr double kRoundingSlack = 1e-9;

std::size_t round_half_up(double x)
{
  return static_cast<std::size_t>(std::floor(x + 0.5 + kRoundingSlack));
}

struct TimedPoint
{
  double t;
  Vec2 pos;
};

std::vector<TimedPoint> knots(const Trajectory & future, const ActorState & anchor)
{
  std::vector<TimedPoint> pts;
  pts.push_back({static_cast<double>(anchor.t), anchor.pos});
  for (const auto & s : future.states) {
    if (s.valid && s.t > anchor.t) {
      pts.push_back({static_cast<double>(s.t), s.pos});
    }
  }
  return pts;
}

}  // namespace

const char * to_string(CoopRole role)
{
  switch (role) {
    case CoopRole::None:
      return "none";
    case CoopRole::PathOnly:
      return "path";
    case CoopRole::FullTrajectory:
      return "trajectory";
  }
  return "?";
}

CoopRole CoopAssignment::role_of(const std::string & actor_id) const
{
  auto it = roles.find(actor_id);
  return it == roles.end() ? CoopRole::None : it->second;
}

std::size_t CoopAssignment::count(CoopRole role) const
{
  return static_cast<std::size_t>(std::count_if(
    roles.begin(), roles.end(), [role](const auto & kv) { return kv.second == role; }));
}

std::size_t full_trajectory_count(std::size_t n_cooperative, double theta_type)
{
  return std::min(n_cooperative, round_half_up(static_cast<double>(n_cooperative) * theta_type));
}

std::vector<std::string> eligible_actors(const Scene & scene, bool exclude_aoi, int min_future_states)
{
  const std::size_t needed =
    static_cast<std::size_t>(min_future_states < 0 ? scene.horizon : min_future_states);
  std::vector<std::string> out;
  for (const auto & a : scene.actors) {
    if (exclude_aoi && a.id == scene.aoi_id) {
      continue;
    }
    if (!a.future_gt || a.future_gt->valid_count() < needed || a.future_gt->valid_count() == 0) {
      continue;
    }
    out.push_back(a.id);
  }
  return out;
}

CoopAssignment sample_roles(
  const Scene & scene, double theta_gt, double theta_type, bool exclude_aoi, Rng & rng,
  int min_future_states)
{
  if (!(theta_gt >= 0.0 && theta_gt <= 1.0) || !(theta_type >= 0.0 && theta_type <= 1.0)) {
    throw ConfigError("theta_gt and theta_type must lie in [0,1]");
  }
  CoopAssignment out;
  out.theta_gt_used = theta_gt;
  out.theta_type_used = theta_type;
  for (const auto & a : scene.actors) {
    out.roles[a.id] = CoopRole::None;
  }

  std::vector<std::string> pool = eligible_actors(scene, exclude_aoi, min_future_states);
  std::size_t n_coop =
    std::min(pool.size(), round_half_up(static_cast<double>(pool.size()) * theta_gt));
  // Partial Fisher-Yates: the first n_coop entries form a uniform sample without replacement
  // in uniform order, so taking the leading ones as trajectories is a uniform sub-sample.
  for (std::size_t i = 0; i < n_coop; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::string> selected(pool.begin(), pool.begin() + static_cast<long>(n_coop));
  std::size_t n_traj = full_trajectory_count(n_coop, theta_type);

  // The AOI may only transmit a path. If that leaves too few trajectory candidates, the AOI
  // is replaced by the next shuffled eligible actor, or dropped when none remains.
  auto aoi_pos = std::find(selected.begin(), selected.end(), scene.aoi_id);
  if (aoi_pos != selected.end() && selected.size() - 1 < n_traj) {
    if (n_coop < pool.size()) {
      *aoi_pos = pool[n_coop];
    } else {
      selected.erase(aoi_pos);
      n_coop = selected.size();
      n_traj = full_trajectory_count(n_coop, theta_type);
    }
  }

  std::size_t assigned = 0;
  for (const auto & id : selected) {
    CoopRole role = CoopRole::PathOnly;
    if (id != scene.aoi_id && assigned < n_traj) {
      role = CoopRole::FullTrajectory;
      ++assigned;
    }
    out.roles[id] = role;
    out.beta[id] = 1.0;
  }
  return out;
}

void sample_betas(CoopAssignment & assignment, Rng & rng, double lo, double hi)
{
  for (auto & [id, b] : assignment.beta) {
    b = uniform(rng, lo, hi);
  }
}

Trajectory scale_trajectory(
  const Trajectory & future, const ActorState & anchor, double beta, int horizon)
{
  if (future.valid_count() == 0) {
    throw EmptyFuture("scale_trajectory: future has no valid states");
  }
  if (!(beta > 0.0) || !anchor.valid) {
    throw ValueError("scale_trajectory: beta must be positive and the anchor valid");
  }
  const std::vector<TimedPoint> pts = knots(future, anchor);

  // Extrapolation velocity: last non-degenerate segment, per step.
  Vec2 velocity{0.0, 0.0};
  for (std::size_t i = pts.size() - 1; i >= 1; --i) {
    const Vec2 d = pts[i].pos - pts[i - 1].pos;
    if (d.norm() >= 1e-12) {
      velocity = d * (1.0 / (pts[i].t - pts[i - 1].t));
      break;
    }
  }

  Trajectory out;
  out.states.reserve(static_cast<std::size_t>(horizon));
  std::size_t seg = 1;
  for (int j = 1; j <= horizon; ++j) {
    const double tau = static_cast<double>(anchor.t) + beta * static_cast<double>(j);
    Vec2 pos;
    if (tau >= pts.back().t) {
      pos = pts.back().pos + velocity * (tau - pts.back().t);
    } else {
      while (seg + 1 < pts.size() && pts[seg].t <= tau) {
        ++seg;
      }
      const TimedPoint & a = pts[seg - 1];
      const TimedPoint & b = pts[seg];
      if (tau == a.t) {
        pos = a.pos;
      } else {
        const double u = (tau - a.t) / (b.t - a.t);
        pos = a.pos + (b.pos - a.pos) * u;
      }
    }
    out.states.push_back({anchor.t + j, pos, true});
  }
  return out;
}

Path trajectory_to_path(const Trajectory & scaled_future, const ActorState & anchor, double interval)
{
  std::vector<Vec2> poly{anchor.pos};
  for (const auto & s : scaled_future.states) {
    if (s.valid) {
      poly.push_back(s.pos);
    }
  }
  double total = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    total += distance(poly[i], poly[i - 1]);
  }
  Path path;
  if (total < 1e-9) {
    return path;
  }

  // Walk forward, emitting the first polyline point at euclidean distance `interval` from the
  // previous emitted point. Every segment start visited lies inside that circle, so the crossing
  // is the larger root of |a + u d - c|^2 = r^2.
  const double r2 = interval * interval;
  Vec2 center = anchor.pos;
  std::size_t seg = 1;
  double u_start = 0.0;
  while (seg < poly.size()) {
    const Vec2 a = poly[seg - 1];
    const Vec2 d = poly[seg] - a;
    const double dd = d.dot(d);
    if (dd < 1e-24) {
      ++seg;
      u_start = 0.0;
      continue;
    }
    const Vec2 ac = a - center;
    const double b = d.dot(ac);
    const double c = ac.dot(ac) - r2;
    const double disc = b * b - dd * c;
    const double root = disc >= 0.0 ? (-b + std::sqrt(disc)) / dd : -1.0;
    if (root >= u_start && root <= 1.0) {
      center = a + d * root;
      path.points.push_back(center);
      u_start = root;
    } else {
      ++seg;
      u_start = 0.0;
    }
  }
  const Vec2 end = poly.back();
  const Vec2 last = path.points.empty() ? anchor.pos : path.points.back();
  if (distance(end, last) > 1e-9) {
    path.points.push_back(end);
  }
  return path;
}

AugmentedScene apply_assignment(const Scene & scene, const CoopAssignment & assignment)
{
  AugmentedScene out;
  out.base = scene;
  out.assignment = assignment;
  for (const auto & [id, role] : assignment.roles) {
    if (scene.find_actor(id) == nullptr) {
      throw ReferenceError("assignment references unknown actor '" + id + "'");
    }
  }
  for (const auto & a : scene.actors) {
    const CoopRole role = assignment.role_of(a.id);
    if (role != CoopRole::FullTrajectory) {
      out.predict_set.push_back(a.id);
    }
    if (role == CoopRole::None) {
      continue;
    }
    if (!a.future_gt || a.future_gt->valid_count() == 0) {
      throw MissingFuture("cooperative actor '" + a.id + "' has no ground-truth future");
    }
    auto bit = assignment.beta.find(a.id);
    const double beta = bit == assignment.beta.end() ? 1.0 : bit->second;
    const ActorState & anchor = *a.current();
    Trajectory scaled = scale_trajectory(*a.future_gt, anchor, beta, scene.horizon);
    if (role == CoopRole::FullTrajectory) {
      out.coop_trajectories.emplace(a.id, std::move(scaled));
    } else {
      out.coop_paths.emplace(a.id, trajectory_to_path(scaled, anchor));
    }
  }
  return out;
}

}  // namespace coop

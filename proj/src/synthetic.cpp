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

#include "coop/synthetic.hpp"

#include "coop/dataset.hpp"
#include "coop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>

namespace coop
{
namespace
{
constexpr double kPi = std::numbers::pi;
constexpr int kMaxAttempts = 100;

Vec2 rotate(const Vec2 & v, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Points from p0 (included) along a straight line, about `spacing` apart.
std::vector<Vec2> straight_points(const Vec2 & p0, double heading, double length, double spacing)
{
  const int n = std::max(1, static_cast<int>(std::ceil(length / spacing)));
  const Vec2 dir{std::cos(heading), std::sin(heading)};
  std::vector<Vec2> pts;
  for (int i = 0; i <= n; ++i) {
    pts.push_back(p0 + dir * (length * i / n));
  }
  return pts;
}

/// Circular arc from p0 with initial `heading`; positive angle turns left.
std::vector<Vec2> arc_points(const Vec2 & p0, double heading, double radius, double angle, double spacing)
{
  const double side = angle >= 0.0 ? 1.0 : -1.0;
  const Vec2 center = p0 + Vec2{-std::sin(heading), std::cos(heading)} * (radius * side);
  const int n = std::max(1, static_cast<int>(std::ceil(radius * std::abs(angle) / spacing)));
  std::vector<Vec2> pts{p0};
  for (int i = 1; i <= n; ++i) {
    pts.push_back(center + rotate(p0 - center, angle * i / n));
  }
  return pts;
}

double end_heading(const std::vector<Vec2> & pts)
{
  const Vec2 d = pts.back() - pts[pts.size() - 2];
  return std::atan2(d.y, d.x);
}

void append(std::vector<Vec2> & pts, const std::vector<Vec2> & more)
{
  pts.insert(pts.end(), more.begin() + (pts.empty() ? 0 : 1), more.end());
}

LaneSegment lane(std::string id, std::vector<Vec2> pts)
{
  LaneSegment l;
  l.id = std::move(id);
  l.centerline = std::move(pts);
  return l;
}

void connect(std::vector<LaneSegment> & lanes, const std::string & from, const std::string & to)
{
  for (auto & l : lanes) {
    if (l.id == from) {
      l.successors.push_back(to);
    }
    if (l.id == to) {
      l.predecessors.push_back(from);
    }
  }
}

const LaneSegment & find_lane(const std::vector<LaneSegment> & lanes, const std::string & id)
{
  for (const auto & l : lanes) {
    if (l.id == id) {
      return l;
    }
  }
  throw ReferenceError("lane '" + id + "' not in map");
}

/// Arc-length parameterised polyline of a lane route.
struct RoutePolyline
{
  std::vector<Vec2> points;
  std::vector<double> cumulative;

  double length() const { return cumulative.back(); }

  Vec2 at(double s) const
  {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
    i = std::clamp<std::size_t>(i, 1, points.size() - 1);
    const double seg = cumulative[i] - cumulative[i - 1];
    const double u = seg > 0.0 ? (s - cumulative[i - 1]) / seg : 0.0;
    return points[i - 1] + (points[i] - points[i - 1]) * u;
  }
};

RoutePolyline route_polyline(const std::vector<LaneSegment> & lanes, const std::vector<std::string> & route)
{
  RoutePolyline r;
  for (const auto & id : route) {
    append(r.points, find_lane(lanes, id).centerline);
  }
  r.cumulative.push_back(0.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    r.cumulative.push_back(r.cumulative.back() + distance(r.points[i - 1], r.points[i]));
  }
  return r;
}

std::vector<std::string> random_route(const std::vector<LaneSegment> & lanes, Rng & rng)
{
  std::vector<const LaneSegment *> entries;
  for (const auto & l : lanes) {
    if (l.predecessors.empty()) {
      entries.push_back(&l);
    }
  }
  const LaneSegment * cur = entries[uniform_index(rng, entries.size())];
  std::vector<std::string> route{cur->id};
  while (!cur->successors.empty()) {
    cur = &find_lane(lanes, cur->successors[uniform_index(rng, cur->successors.size())]);
    route.push_back(cur->id);
  }
  return route;
}

/// Relative arc length per step for `steps` steps of a clamped random-walk acceleration profile.
std::vector<double> speed_profile(const WorldSpec & spec, Rng & rng, int steps, int now_index)
{
  std::vector<double> v(static_cast<std::size_t>(steps));
  double speed = uniform(rng, spec.min_speed, spec.max_speed);
  double accel = uniform(rng, -1.0, 1.0);
  // Optional hard stop starting somewhere in the first half of the future.
  int brake_at = steps;
  double decel = 0.0;
  if (uniform01(rng) < spec.brake_prob) {
    brake_at = now_index + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.horizon / 2 + 1)));
    decel = uniform(rng, 0.5 * spec.max_accel, spec.max_accel);
  }
  for (int k = 0; k < steps; ++k) {
    v[static_cast<std::size_t>(k)] = speed;
    accel = std::clamp(accel + normal(rng) * spec.jerk_std * spec.dt, -spec.max_accel, spec.max_accel);
    if (k >= brake_at) {
      speed = std::max(0.0, speed - decel * spec.dt);
    } else {
      speed = std::clamp(speed + accel * spec.dt, 0.0, spec.speed_limit);
    }
  }
  return v;
}

std::vector<double> integrate(const std::vector<double> & speed, double dt)
{
  std::vector<double> s(speed.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < speed.size(); ++k) {
    s[k] = acc;
    acc += speed[k] * dt;
  }
  return s;
}

struct ActorPlan
{
  std::vector<std::string> route;
  std::vector<double> s;      //!< Arc length per scene step
  std::vector<double> speed;  //!< Speed per scene step
  std::vector<double> s_ext;  //!< Extended arc length starting follower_delay steps earlier (leaders only)
  std::vector<double> v_ext;
  int leader{-1};
};

}  // namespace

const char * to_string(Topology t)
{
  switch (t) {
    case Topology::Straight:
      return "straight";
    case Topology::Curve:
      return "curve";
    case Topology::Intersection:
      return "intersection";
    case Topology::Merge:
      return "merge";
  }
  return "?";
}

void WorldSpec::validate() const
{
  double total = 0.0;
  for (double p : topology_mix) {
    if (!(p >= 0.0)) {
      throw ConfigError("topology probabilities must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("topology probabilities must sum to 1");
  }
  if (min_actors < 1 || max_actors < min_actors) {
    throw ConfigError("invalid actor count range");
  }
  if (!(min_speed >= 0.0 && max_speed >= min_speed && speed_limit >= max_speed)) {
    throw ConfigError("invalid speed range");
  }
  if (!(coupling_prob >= 0.0 && coupling_prob <= 1.0) || !(branch_ambiguity >= 0.0 && branch_ambiguity <= 1.0)) {
    throw ConfigError("probabilities must lie in [0,1]");
  }
  if (!(max_accel > 0.0) || !(jerk_std >= 0.0) || !(brake_prob >= 0.0 && brake_prob <= 1.0) || follower_delay < 0 ||
      !(point_spacing > 0.0)) {
    throw ConfigError("invalid dynamics parameters");
  }
  if (history_steps < 2 || horizon < 1 || !(dt > 0.0)) {
    throw ConfigError("invalid time discretisation");
  }
}

nlohmann::json to_json(const WorldSpec & s)
{
  return {{"n_scenes", s.n_scenes},
          {"topology_mix",
           {{"straight", s.topology_mix[0]},
            {"curve", s.topology_mix[1]},
            {"intersection", s.topology_mix[2]},
            {"merge", s.topology_mix[3]}}},
          {"min_actors", s.min_actors},
          {"max_actors", s.max_actors},
          {"min_speed", s.min_speed},
          {"max_speed", s.max_speed},
          {"speed_limit", s.speed_limit},
          {"max_accel", s.max_accel},
          {"jerk_std", s.jerk_std},
          {"brake_prob", s.brake_prob},
          {"coupling_prob", s.coupling_prob},
          {"follower_delay", s.follower_delay},
          {"branch_ambiguity", s.branch_ambiguity},
          {"point_spacing", s.point_spacing},
          {"history_steps", s.history_steps},
          {"horizon", s.horizon},
          {"dt", s.dt},
          {"seed", s.seed}};
}

WorldSpec world_spec_from_json(const nlohmann::json & j, const WorldSpec & base)
{
  WorldSpec s = base;
  try {
    auto get = [&](const char * key, auto & field) {
      if (j.contains(key)) {
        j.at(key).get_to(field);
      }
    };
    get("n_scenes", s.n_scenes);
    if (j.contains("topology_mix")) {
      const auto & m = j.at("topology_mix");
      const char * names[] = {"straight", "curve", "intersection", "merge"};
      for (std::size_t i = 0; i < 4; ++i) {
        s.topology_mix[i] = m.value(names[i], 0.0);
      }
    }
    get("min_actors", s.min_actors);
    get("max_actors", s.max_actors);
    get("min_speed", s.min_speed);
    get("max_speed", s.max_speed);
    get("speed_limit", s.speed_limit);
    get("max_accel", s.max_accel);
    get("jerk_std", s.jerk_std);
    get("brake_prob", s.brake_prob);
    get("coupling_prob", s.coupling_prob);
    get("follower_delay", s.follower_delay);
    get("branch_ambiguity", s.branch_ambiguity);
    get("point_spacing", s.point_spacing);
    get("history_steps", s.history_steps);
    get("horizon", s.horizon);
    get("dt", s.dt);
    get("seed", s.seed);
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("world spec: ") + e.what());
  }
  s.validate();
  return s;
}

GeneratedMap generate_map(const WorldSpec & spec, Rng & rng)
{
  spec.validate();
  const double sp = spec.point_spacing;
  GeneratedMap map;
  double u = uniform01(rng);
  std::size_t pick = 0;
  while (pick < 3 && u >= spec.topology_mix[pick]) {
    u -= spec.topology_mix[pick];
    ++pick;
  }
  while (spec.topology_mix[pick] == 0.0 && pick > 0) {
    --pick;
  }
  map.topology = static_cast<Topology>(pick);
  auto & lanes = map.lanes;
  const Vec2 origin{0.0, 0.0};

  switch (map.topology) {
    case Topology::Straight: {
      lanes.push_back(lane("a0", straight_points({-80.0, 0.0}, 0.0, 80.0, sp)));
      lanes.push_back(lane("a1", straight_points(origin, 0.0, 80.0, sp)));
      connect(lanes, "a0", "a1");
      if (uniform01(rng) < 0.5) {
        lanes.push_back(lane("b0", straight_points({-80.0, 3.5}, 0.0, 80.0, sp)));
        lanes.push_back(lane("b1", straight_points({0.0, 3.5}, 0.0, 80.0, sp)));
        connect(lanes, "b0", "b1");
        for (auto & l : lanes) {
          if (l.id == "a0" || l.id == "a1") {
            l.left.push_back(l.id == "a0" ? "b0" : "b1");
          } else {
            l.right.push_back(l.id == "b0" ? "a0" : "a1");
          }
        }
      }
      break;
    }
    case Topology::Curve: {
      const double radius = uniform(rng, 25.0, 50.0);
      const double angle = (uniform01(rng) < 0.5 ? 1.0 : -1.0) * uniform(rng, 0.7, kPi / 2);
      auto c1 = arc_points(origin, 0.0, radius, angle, sp);
      auto c2 = straight_points(c1.back(), end_heading(c1), 60.0, sp);
      lanes.push_back(lane("c0", straight_points({-70.0, 0.0}, 0.0, 70.0, sp)));
      lanes.push_back(lane("c1", c1));
      lanes.push_back(lane("c2", c2));
      connect(lanes, "c0", "c1");
      connect(lanes, "c1", "c2");
      break;
    }
    case Topology::Intersection: {
      lanes.push_back(lane("in", straight_points({-70.0, 0.0}, 0.0, 70.0, sp)));
      auto add_turn = [&](const std::string & name, double angle) {
        auto conn = arc_points(origin, 0.0, uniform(rng, 10.0, 16.0), angle, sp);
        auto out = straight_points(conn.back(), end_heading(conn), 60.0, sp);
        lanes.push_back(lane(name + "_conn", conn));
        lanes.push_back(lane(name + "_out", out));
        connect(lanes, "in", name + "_conn");
        connect(lanes, name + "_conn", name + "_out");
      };
      if (uniform01(rng) < 0.5) {
        auto conn = straight_points(origin, 0.0, 16.0, sp);
        lanes.push_back(lane("straight_conn", conn));
        lanes.push_back(lane("straight_out", straight_points(conn.back(), 0.0, 60.0, sp)));
        connect(lanes, "in", "straight_conn");
        connect(lanes, "straight_conn", "straight_out");
        const bool left = uniform01(rng) < 0.5;
        add_turn(left ? "left" : "right", left ? kPi / 2 : -kPi / 2);
      } else {
        add_turn("left", kPi / 2);
        add_turn("right", -kPi / 2);
      }
      break;
    }
    case Topology::Merge: {
      const double theta = uniform(rng, 0.3, 0.6);
      auto bend = arc_points(origin, theta, uniform(rng, 30.0, 60.0), -theta, sp);
      const Vec2 shift = Vec2{0.0, 0.0} - bend.back();
      for (auto & p : bend) {
        p = p + shift;
      }
      bend.back() = origin;
      const Vec2 back_dir{std::cos(theta), std::sin(theta)};
      auto ramp = straight_points(bend.front() - back_dir * 40.0, theta, 40.0, sp);
      ramp.back() = bend.front();
      append(ramp, bend);
      lanes.push_back(lane("main", straight_points({-70.0, 0.0}, 0.0, 70.0, sp)));
      lanes.push_back(lane("ramp", ramp));
      lanes.push_back(lane("out", straight_points(origin, 0.0, 80.0, sp)));
      connect(lanes, "main", "out");
      connect(lanes, "ramp", "out");
      break;
    }
  }

  const double rot = uniform(rng, -kPi, kPi);
  const Vec2 shift{uniform(rng, -100.0, 100.0), uniform(rng, -100.0, 100.0)};
  for (auto & l : lanes) {
    for (auto & p : l.centerline) {
      p = rotate(p, rot) + shift;
    }
  }
  return map;
}

SimulatedScene simulate_actors(const GeneratedMap & map, const WorldSpec & spec, Rng & rng,
                               const std::string & scene_id)
{
  spec.validate();
  if (map.lanes.empty()) {
    throw ValueError("cannot simulate actors without lanes");
  }
  const int steps = spec.history_steps + spec.horizon;
  const int now = spec.history_steps - 1;
  const int delay = spec.follower_delay;

  // Lanes ending in a branch and the arc length of their end along routes that start there.
  std::vector<std::string> branch_lanes;
  for (const auto & l : map.lanes) {
    if (l.successors.size() >= 2 && l.predecessors.empty()) {
      branch_lanes.push_back(l.id);
    }
  }

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int n_actors =
      spec.min_actors + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(spec.max_actors - spec.min_actors + 1)));
    const bool branch_mode = !branch_lanes.empty() && uniform01(rng) < spec.branch_ambiguity;
    const bool branch_follower = branch_mode && n_actors >= 2 && uniform01(rng) < spec.coupling_prob;

    std::vector<ActorPlan> plans;
    std::vector<RoutePolyline> polylines;
    auto independent = [&](std::vector<std::string> route, double target_now) {
      ActorPlan p;
      p.route = std::move(route);
      const auto v = speed_profile(spec, rng, steps + delay, now + delay);
      p.s_ext = integrate(v, spec.dt);
      const double offset = target_now - p.s_ext[static_cast<std::size_t>(now + delay)];
      for (auto & s : p.s_ext) {
        s += offset;
      }
      p.s.assign(p.s_ext.begin() + delay, p.s_ext.end());
      p.speed.assign(v.begin() + delay, v.end());
      p.v_ext = v;
      return p;
    };
    auto follower = [&](int leader_index, double gap) {
      const ActorPlan & l = plans[static_cast<std::size_t>(leader_index)];
      ActorPlan p;
      p.route = l.route;
      p.leader = leader_index;
      for (int k = 0; k < steps; ++k) {
        p.s.push_back(l.s_ext[static_cast<std::size_t>(k)] - gap);
      }
      // Speed of the leader `delay` steps earlier.
      p.speed.assign(l.v_ext.begin(), l.v_ext.begin() + steps);
      return p;
    };

    if (branch_mode) {
      const std::string & entry = branch_lanes[uniform_index(rng, branch_lanes.size())];
      std::vector<std::string> route{entry};
      const LaneSegment * cur = &find_lane(map.lanes, entry);
      while (!cur->successors.empty()) {
        cur = &find_lane(map.lanes, cur->successors[uniform_index(rng, cur->successors.size())]);
        route.push_back(cur->id);
      }
      const RoutePolyline entry_line = route_polyline(map.lanes, {entry});
      const double target = entry_line.length() - uniform(rng, 3.0, 30.0);
      if (branch_follower) {
        const double gap = uniform(rng, 3.0, 8.0);
        ActorPlan lead = independent(route, 0.0);
        // Shift the leader so that its follower sits at `target` now.
        const double shift = target + gap - lead.s_ext[static_cast<std::size_t>(now)];
        for (auto & s : lead.s_ext) {
          s += shift;
        }
        for (auto & s : lead.s) {
          s += shift;
        }
        plans.push_back(std::move(lead));
        plans.push_back(follower(0, gap));
      } else {
        plans.push_back(independent(route, target));
      }
    }
    while (static_cast<int>(plans.size()) < n_actors) {
      std::vector<int> leaders;
      for (std::size_t i = 0; i < plans.size(); ++i) {
        if (plans[i].leader < 0) {
          leaders.push_back(static_cast<int>(i));
        }
      }
      if (!leaders.empty() && uniform01(rng) < spec.coupling_prob) {
        const int l = leaders[uniform_index(rng, leaders.size())];
        plans.push_back(follower(l, uniform(rng, 3.0, 8.0)));
      } else {
        auto route = random_route(map.lanes, rng);
        const double first_len = route_polyline(map.lanes, {route.front()}).length();
        plans.push_back(independent(std::move(route), uniform(rng, 15.0, first_len + 10.0)));
      }
    }

    SimulatedScene out;
    out.topology = map.topology;
    out.scene.id = scene_id;
    out.scene.dt = spec.dt;
    out.scene.horizon = spec.horizon;
    out.scene.lanes = map.lanes;
    std::vector<int> full_future;
    std::vector<int> plan_to_actor(plans.size(), -1);
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const RoutePolyline line = route_polyline(map.lanes, plans[i].route);
      auto inside = [&](int k) {
        const double s = plans[i].s[static_cast<std::size_t>(k)];
        return s >= 0.0 && s <= line.length();
      };
      if (!inside(now)) {
        continue;
      }
      SimulatedActor sa;
      sa.actor.id = "a" + std::to_string(out.actors.size());
      sa.route = plans[i].route;
      sa.speed = plans[i].speed;
      sa.leader = plans[i].leader >= 0 ? plan_to_actor[static_cast<std::size_t>(plans[i].leader)] : -1;
      Trajectory future;
      bool complete = true;
      for (int k = 0; k < steps; ++k) {
        const int t = k - now;
        if (!inside(k)) {
          if (t > 0) {
            complete = false;
          }
          continue;
        }
        ActorState st{t, line.at(plans[i].s[static_cast<std::size_t>(k)]), true};
        if (t <= 0) {
          sa.actor.history.states.push_back(st);
        } else {
          future.states.push_back(st);
        }
      }
      if (!future.states.empty()) {
        sa.actor.future_gt = std::move(future);
      }
      plan_to_actor[i] = static_cast<int>(out.actors.size());
      if (complete) {
        full_future.push_back(static_cast<int>(out.actors.size()));
      }
      out.actors.push_back(std::move(sa));
    }
    if (full_future.empty()) {
      continue;
    }
    int aoi = -1;
    if (branch_mode) {
      const int designated = plan_to_actor[branch_follower ? 1 : 0];
      if (std::find(full_future.begin(), full_future.end(), designated) != full_future.end()) {
        aoi = designated;
      }
    }
    if (aoi < 0) {
      aoi = full_future[uniform_index(rng, full_future.size())];
    }
    for (const auto & sa : out.actors) {
      out.scene.actors.push_back(sa.actor);
    }
    out.scene.aoi_id = out.actors[static_cast<std::size_t>(aoi)].actor.id;
    validate_scene(out.scene, spec.history_steps);
    return out;
  }
  throw ValueError("could not place an actor with a full future after repeated attempts");
}

SimulatedScene generate_scene(const WorldSpec & spec, std::size_t index)
{
  Rng rng(mix_seed({spec.seed, static_cast<std::uint64_t>(index)}));
  const GeneratedMap map = generate_map(spec, rng);
  char id[32];
  std::snprintf(id, sizeof(id), "scene_%06zu", index);
  return simulate_actors(map, spec, rng, id);
}

PredictionSet constant_velocity_baseline(const Scene & scene, int modes, bool strict)
{
  const Actor * aoi = &scene.aoi();
  const ActorState * cur = aoi->current();
  const ActorState * prev = nullptr;
  for (const auto & s : aoi->history.states) {
    if (s.valid && s.t < 0 && (prev == nullptr || s.t > prev->t)) {
      prev = &s;
    }
  }
  Vec2 vel{0.0, 0.0};
  if (prev == nullptr) {
    if (strict) {
      throw DegenerateHistory("AOI '" + aoi->id + "' has a single valid history state");
    }
  } else {
    vel = (cur->pos - prev->pos) * (1.0 / static_cast<double>(-prev->t));
  }
  ActorPrediction p;
  p.actor_id = aoi->id;
  std::vector<Vec2> mode;
  for (int j = 1; j <= scene.horizon; ++j) {
    mode.push_back(cur->pos + vel * static_cast<double>(j));
  }
  p.modes.assign(static_cast<std::size_t>(modes), mode);
  p.logits.assign(static_cast<std::size_t>(modes), 0.0);
  p.probabilities.assign(static_cast<std::size_t>(modes), 1.0 / modes);
  PredictionSet set;
  set.actors.push_back(std::move(p));
  return set;
}

Scene make_micro_scene(int history_steps, int horizon)
{
  Scene s;
  s.id = "micro";
  s.dt = kDefaultDt;
  s.horizon = horizon;
  s.aoi_id = "ego";
  const double len = 8.0 + 0.2 * (history_steps + horizon);
  LaneSegment l0 = lane("l0", straight_points({-len, 0.0}, 0.0, len, 2.5));
  LaneSegment l1 = lane("l1", straight_points({0.0, 0.0}, 0.0, len, 2.5));
  s.lanes = {l0, l1};
  connect(s.lanes, "l0", "l1");
  auto make = [&](const std::string & id, double x0, double v, double a, double y) {
    Actor actor;
    actor.id = id;
    Trajectory future;
    for (int t = -(history_steps - 1); t <= horizon; ++t) {
      const double tt = t * s.dt;
      ActorState st{t, {x0 + v * tt + 0.5 * a * tt * tt, y}, true};
      (t <= 0 ? actor.history.states : future.states).push_back(st);
    }
    actor.future_gt = std::move(future);
    return actor;
  };
  s.actors.push_back(make("ego", -4.0, 2.0, 0.5, 0.0));
  s.actors.push_back(make("lead", 3.0, 2.5, -0.3, 0.2));
  validate_scene(s, history_steps);
  return s;
}

void write_dataset(const WorldSpec & spec, const std::string & dir)
{
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "scenes");
  DatasetManifest manifest;
  manifest.generator = to_json(spec);
  const std::size_t n_train = (spec.n_scenes * 8) / 10;
  for (std::size_t i = 0; i < spec.n_scenes; ++i) {
    const SimulatedScene s = generate_scene(spec, i);
    const std::string rel = "scenes/" + s.scene.id + ".json";
    save_scene_file(s.scene, (fs::path(dir) / rel).string());
    manifest.files.push_back(rel);
    (i < n_train || spec.n_scenes == 1 ? manifest.train : manifest.val).push_back(i);
  }
  write_manifest(dir, manifest);
}

}  // namespace coop

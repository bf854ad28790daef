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

#include "coop/scene.hpp"

#include "coop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace coop
{
using nlohmann::json;

const ActorState * Trajectory::at(int t) const
{
  auto it = std::lower_bound(
    states.begin(), states.end(), t, [](const ActorState & s, int v) { return s.t < v; });
  if (it == states.end() || it->t != t) {
    return nullptr;
  }
  return &*it;
}

std::size_t Trajectory::valid_count() const
{
  return static_cast<std::size_t>(
    std::count_if(states.begin(), states.end(), [](const ActorState & s) { return s.valid; }));
}

const Actor * Scene::find_actor(const std::string & actor_id) const
{
  for (const auto & a : actors) {
    if (a.id == actor_id) {
      return &a;
    }
  }
  return nullptr;
}

int Scene::actor_index(const std::string & actor_id) const
{
  for (std::size_t i = 0; i < actors.size(); ++i) {
    if (actors[i].id == actor_id) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

const Actor & Scene::aoi() const
{
  const Actor * a = find_actor(aoi_id);
  if (a == nullptr) {
    throw ReferenceError("scene '" + id + "': aoi_id '" + aoi_id + "' not among actors");
  }
  return *a;
}

void EvalConfig::validate(int modes) const
{
  if (!(theta_gt >= 0.0 && theta_gt <= 1.0)) {
    throw ConfigError("theta_gt must lie in [0,1]");
  }
  if (!(theta_type >= 0.0 && theta_type <= 1.0)) {
    throw ConfigError("theta_type must lie in [0,1]");
  }
  if (!(beta > 0.0 && beta <= 2.0)) {
    throw ConfigError("beta must lie in (0,2]");
  }
  if (k < 1 || k > modes) {
    throw InvalidK("K=" + std::to_string(k) + " outside [1," + std::to_string(modes) + "]");
  }
}

namespace
{
void check_trajectory(const Trajectory & traj, const std::string & what)
{
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const auto & s = traj.states[i];
    if (i > 0 && s.t <= traj.states[i - 1].t) {
      throw ValueError(what + ": time indices not strictly increasing at t=" + std::to_string(s.t));
    }
    if (s.valid && !s.pos.finite()) {
      throw ValueError(what + ": non-finite position at t=" + std::to_string(s.t));
    }
  }
  if (traj.valid_count() == 0) {
    throw ValueError(what + ": no valid state");
  }
}
}  // namespace

void validate_scene(const Scene & scene, int max_history_steps)
{
  const std::string where = "scene '" + scene.id + "'";
  if (scene.actors.empty()) {
    throw ValueError(where + ": actor list is empty");
  }
  if (scene.horizon < 1) {
    throw ValueError(where + ": horizon must be >= 1");
  }
  if (!(scene.dt > 0.0) || !std::isfinite(scene.dt)) {
    throw ValueError(where + ": dt must be positive");
  }

  std::unordered_set<std::string> actor_ids;
  for (const auto & a : scene.actors) {
    const std::string what = where + " actor '" + a.id + "'";
    if (!actor_ids.insert(a.id).second) {
      throw ValueError(what + ": duplicate actor id");
    }
    check_trajectory(a.history, what + " history");
    for (const auto & s : a.history.states) {
      if (s.t > 0 || s.t <= -max_history_steps) {
        throw ValueError(what + ": history time index " + std::to_string(s.t) + " out of range");
      }
    }
    const ActorState * now = a.history.at(0);
    if (now == nullptr || !now->valid) {
      throw ValueError(what + ": history lacks a valid state at t=0");
    }
    if (a.future_gt) {
      check_trajectory(*a.future_gt, what + " future");
      for (const auto & s : a.future_gt->states) {
        if (s.t < 1 || s.t > scene.horizon) {
          throw ValueError(what + ": future time index " + std::to_string(s.t) + " out of range");
        }
      }
    }
  }
  if (!actor_ids.contains(scene.aoi_id)) {
    throw ReferenceError(where + ": aoi_id '" + scene.aoi_id + "' not among actors");
  }

  std::unordered_set<std::string> lane_ids;
  for (const auto & l : scene.lanes) {
    if (!lane_ids.insert(l.id).second) {
      throw ValueError(where + ": duplicate lane id '" + l.id + "'");
    }
    if (l.centerline.size() < 2) {
      throw ValueError(where + ": lane '" + l.id + "' centerline has fewer than 2 points");
    }
    for (const auto & p : l.centerline) {
      if (!p.finite()) {
        throw ValueError(where + ": lane '" + l.id + "' has a non-finite point");
      }
    }
  }
  for (const auto & l : scene.lanes) {
    for (const auto * list : {&l.predecessors, &l.successors, &l.left, &l.right}) {
      for (const auto & ref : *list) {
        if (!lane_ids.contains(ref)) {
          throw ReferenceError(where + ": lane '" + l.id + "' references unknown lane '" + ref + "'");
        }
      }
    }
  }
}

namespace
{
const json & require(const json & obj, const char * key, const std::string & where)
{
  if (!obj.is_object()) {
    throw SchemaError(where + ": expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  return *it;
}

double as_number(const json & v, const std::string & where)
{
  if (!v.is_number()) {
    throw SchemaError(where + ": expected a number");
  }
  return v.get<double>();
}

int as_int(const json & v, const std::string & where)
{
  if (!v.is_number_integer()) {
    throw SchemaError(where + ": expected an integer");
  }
  return v.get<int>();
}

std::string as_id(const json & v, const std::string & where)
{
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    return std::to_string(v.get<long long>());
  }
  throw SchemaError(where + ": expected a string or integer id");
}

std::vector<std::string> as_id_list(const json & v, const std::string & where)
{
  if (!v.is_array()) {
    throw SchemaError(where + ": expected an array");
  }
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto & e : v) {
    out.push_back(as_id(e, where));
  }
  return out;
}

std::vector<std::string> optional_id_list(const json & obj, const char * key, const std::string & where)
{
  auto it = obj.find(key);
  if (it == obj.end()) {
    return {};
  }
  return as_id_list(*it, where + "." + key);
}

json state_to_json(const ActorState & s)
{
  return json{{"t", s.t}, {"x", s.pos.x}, {"y", s.pos.y}, {"valid", s.valid}};
}

}  // namespace

Scene parse_scene(const std::string & document, int max_history_steps)
{
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error & e) {
    throw SchemaError(std::string("scene document is not valid JSON: ") + e.what());
  }

  Scene scene;
  scene.id = as_id(require(doc, "id", "scene"), "scene.id");
  const std::string where = "scene '" + scene.id + "'";
  scene.dt = as_number(require(doc, "dt", where), where + ".dt");
  scene.horizon = as_int(require(doc, "horizon", where), where + ".horizon");
  scene.aoi_id = as_id(require(doc, "aoi_id", where), where + ".aoi_id");

  const json & actors = require(doc, "actors", where);
  if (!actors.is_array()) {
    throw SchemaError(where + ".actors: expected an array");
  }
  for (const auto & ja : actors) {
    Actor actor;
    actor.id = as_id(require(ja, "id", where + ".actors[]"), where + ".actors[].id");
    const std::string aw = where + " actor '" + actor.id + "'";
    const json & states = require(ja, "states", aw);
    if (!states.is_array()) {
      throw SchemaError(aw + ".states: expected an array");
    }
    Trajectory future;
    bool have_prev = false;
    int prev_t = 0;
    for (const auto & js : states) {
      ActorState s;
      s.t = as_int(require(js, "t", aw + ".states[]"), aw + ".states[].t");
      s.pos.x = as_number(require(js, "x", aw + ".states[]"), aw + ".states[].x");
      s.pos.y = as_number(require(js, "y", aw + ".states[]"), aw + ".states[].y");
      const json & valid = require(js, "valid", aw + ".states[]");
      if (!valid.is_boolean()) {
        throw SchemaError(aw + ".states[].valid: expected a boolean");
      }
      s.valid = valid.get<bool>();
      if (have_prev && s.t <= prev_t) {
        throw ValueError(aw + ": time indices not strictly increasing at t=" + std::to_string(s.t));
      }
      have_prev = true;
      prev_t = s.t;
      (s.t <= 0 ? actor.history : future).states.push_back(s);
    }
    if (!future.states.empty()) {
      actor.future_gt = std::move(future);
    }
    scene.actors.push_back(std::move(actor));
  }

  const json & lanes = require(doc, "lanes", where);
  if (!lanes.is_array()) {
    throw SchemaError(where + ".lanes: expected an array");
  }
  for (const auto & jl : lanes) {
    LaneSegment lane;
    lane.id = as_id(require(jl, "id", where + ".lanes[]"), where + ".lanes[].id");
    const std::string lw = where + " lane '" + lane.id + "'";
    const json & cl = require(jl, "centerline", lw);
    if (!cl.is_array()) {
      throw SchemaError(lw + ".centerline: expected an array");
    }
    for (const auto & p : cl) {
      if (!p.is_array() || p.size() != 2) {
        throw SchemaError(lw + ".centerline: points must be [x, y]");
      }
      lane.centerline.push_back({as_number(p[0], lw), as_number(p[1], lw)});
    }
    lane.predecessors = optional_id_list(jl, "pred", lw);
    lane.successors = optional_id_list(jl, "succ", lw);
    lane.left = optional_id_list(jl, "left", lw);
    lane.right = optional_id_list(jl, "right", lw);
    scene.lanes.push_back(std::move(lane));
  }

  validate_scene(scene, max_history_steps);
  return scene;
}

std::string serialize_scene(const Scene & scene)
{
  validate_scene(scene);
  json doc;
  doc["id"] = scene.id;
  doc["dt"] = scene.dt;
  doc["horizon"] = scene.horizon;
  doc["aoi_id"] = scene.aoi_id;
  json actors = json::array();
  for (const auto & a : scene.actors) {
    json states = json::array();
    for (const auto & s : a.history.states) {
      states.push_back(state_to_json(s));
    }
    if (a.future_gt) {
      for (const auto & s : a.future_gt->states) {
        states.push_back(state_to_json(s));
      }
    }
    actors.push_back(json{{"id", a.id}, {"states", std::move(states)}});
  }
  doc["actors"] = std::move(actors);
  json lanes = json::array();
  for (const auto & l : scene.lanes) {
    json cl = json::array();
    for (const auto & p : l.centerline) {
      cl.push_back(json::array({p.x, p.y}));
    }
    lanes.push_back(json{
      {"id", l.id},
      {"centerline", std::move(cl)},
      {"pred", l.predecessors},
      {"succ", l.successors},
      {"left", l.left},
      {"right", l.right}});
  }
  doc["lanes"] = std::move(lanes);
  return doc.dump();
}

Scene load_scene_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open scene file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void save_scene_file(const Scene & scene, const std::string & path)
{
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write scene file " + path);
  }
  out << serialize_scene(scene) << '\n';
}

Vec2 FrameTransform::apply(const Vec2 & p) const
{
  const Vec2 d = p - origin;
  return {cos_theta * d.x + sin_theta * d.y, -sin_theta * d.x + cos_theta * d.y};
}

Vec2 FrameTransform::inverse(const Vec2 & p) const
{
  return Vec2{cos_theta * p.x - sin_theta * p.y, sin_theta * p.x + cos_theta * p.y} + origin;
}

FrameTransform aoi_frame(const Scene & scene)
{
  const Actor & aoi = scene.aoi();
  FrameTransform frame;
  const ActorState * now = aoi.current();
  if (now == nullptr || !now->valid) {
    throw ValueError("scene '" + scene.id + "': AOI has no valid state at t=0");
  }
  frame.origin = now->pos;
  frame.heading_degenerate = true;

  // Last non-degenerate displacement between consecutive valid history states.
  const auto & states = aoi.history.states;
  const ActorState * later = nullptr;
  for (auto it = states.rbegin(); it != states.rend(); ++it) {
    if (!it->valid) {
      continue;
    }
    if (later != nullptr) {
      const Vec2 d = later->pos - it->pos;
      const double n = d.norm();
      if (n >= 1e-9) {
        frame.cos_theta = d.x / n;
        frame.sin_theta = d.y / n;
        frame.heading_degenerate = false;
        break;
      }
    }
    later = &*it;
  }
  return frame;
}

Scene transform_scene(const Scene & scene, const FrameTransform & frame)
{
  Scene out = scene;
  auto move_traj = [&](Trajectory & traj) {
    for (auto & s : traj.states) {
      if (s.valid) {
        s.pos = frame.apply(s.pos);
      }
    }
  };
  for (auto & a : out.actors) {
    move_traj(a.history);
    if (a.future_gt) {
      move_traj(*a.future_gt);
    }
  }
  for (auto & l : out.lanes) {
    for (auto & p : l.centerline) {
      p = frame.apply(p);
    }
  }
  return out;
}

Scene normalize_frame(const Scene & scene, FrameTransform * frame_out)
{
  const FrameTransform frame = aoi_frame(scene);
  if (frame_out != nullptr) {
    *frame_out = frame;
  }
  return transform_scene(scene, frame);
}

}  // namespace coop

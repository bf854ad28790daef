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

#ifndef COOP__SCENE_HPP_
#define COOP__SCENE_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coop
{
inline constexpr int kDefaultHistorySteps = 20;
inline constexpr int kDefaultHorizon = 30;
inline constexpr double kDefaultDt = 0.1;

struct Vec2
{
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2 & o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2 & o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 & operator+=(const Vec2 & o)
  {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2 & o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  bool operator==(const Vec2 &) const = default;
};

inline double distance(const Vec2 & a, const Vec2 & b) { return (a - b).norm(); }

/// One observation on the integer time grid. `pos` is meaningless when `valid` is false.
struct ActorState
{
  int t{0};
  Vec2 pos{};
  bool valid{true};

  bool operator==(const ActorState &) const = default;
};

struct Trajectory
{
  std::vector<ActorState> states;  //!< Strictly increasing `t`.

  /// State at time index `t`, or nullptr.
  const ActorState * at(int t) const;
  std::size_t valid_count() const;
  bool operator==(const Trajectory &) const = default;
};

/// Ordered positions without timing.
struct Path
{
  std::vector<Vec2> points;

  bool operator==(const Path &) const = default;
};

struct LaneSegment
{
  std::string id;
  std::vector<Vec2> centerline;
  std::vector<std::string> predecessors;
  std::vector<std::string> successors;
  std::vector<std::string> left;
  std::vector<std::string> right;

  bool operator==(const LaneSegment &) const = default;
};

struct Actor
{
  std::string id;
  Trajectory history;                    //!< t in (-T_hist, 0]
  std::optional<Trajectory> future_gt;   //!< t in [1, H]; absent at inference

  const ActorState * current() const { return history.at(0); }
  bool operator==(const Actor &) const = default;
};

struct Scene
{
  std::string id;
  double dt{kDefaultDt};
  int horizon{kDefaultHorizon};
  std::string aoi_id;
  std::vector<Actor> actors;
  std::vector<LaneSegment> lanes;

  const Actor * find_actor(const std::string & actor_id) const;
  int actor_index(const std::string & actor_id) const;
  const Actor & aoi() const;
  bool operator==(const Scene &) const = default;
};

/// Evaluation-time cooperative settings.
struct EvalConfig
{
  double theta_gt{0.0};
  double theta_type{0.0};
  bool theta_aoi{false};
  double beta{1.0};
  int k{6};
  std::uint64_t seed{0};

  void validate(int modes) const;
};

/// Checks every type invariant; throws ValueError or ReferenceError.
void validate_scene(const Scene & scene, int max_history_steps = kDefaultHistorySteps);

/// Parses the JSON scene document and validates it.
Scene parse_scene(const std::string & document, int max_history_steps = kDefaultHistorySteps);

/// Validates, then emits a JSON document that `parse_scene` maps back to an equal Scene.
std::string serialize_scene(const Scene & scene);

Scene load_scene_file(const std::string & path);
void save_scene_file(const Scene & scene, const std::string & path);

/// Rigid transform p -> R (p - origin).
struct FrameTransform
{
  Vec2 origin{};
  double cos_theta{1.0};
  double sin_theta{0.0};
  bool heading_degenerate{false};

  Vec2 apply(const Vec2 & p) const;
  Vec2 inverse(const Vec2 & p) const;
};

/// Frame centered on the AOI at t=0 with its last history displacement along +x.
/// Falls back to an identity rotation when the heading is degenerate.
FrameTransform aoi_frame(const Scene & scene);

Scene transform_scene(const Scene & scene, const FrameTransform & frame);

Scene normalize_frame(const Scene & scene, FrameTransform * frame_out = nullptr);

}  // namespace coop

#endif  // COOP__SCENE_HPP_

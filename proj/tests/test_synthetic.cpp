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

#include "coop/dataset.hpp"
#include "coop/metrics.hpp"
#include "coop/synthetic.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

using namespace coop;
namespace fs = std::filesystem;

namespace
{
const LaneSegment & lane(const Scene & s, const std::string & id)
{
  for (const auto & l : s.lanes) {
    if (l.id == id) {
      return l;
    }
  }
  FAIL("unknown lane " << id);
  return s.lanes.front();
}

double distance_to_polyline(const Vec2 & p, const std::vector<Vec2> & line)
{
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Vec2 d = line[i + 1] - line[i];
    const double len2 = d.x * d.x + d.y * d.y;
    double u = len2 > 0.0 ? ((p.x - line[i].x) * d.x + (p.y - line[i].y) * d.y) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    best = std::min(best, distance(p, line[i] + d * u));
  }
  return best;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path temp_dir(const std::string & name)
{
  const fs::path p = fs::temp_directory_path() / ("coop_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Scene scene_with_aoi(const std::vector<Vec2> & history, const std::vector<Vec2> & future)
{
  Scene s;
  s.id = "hand";
  s.horizon = static_cast<int>(future.size());
  Actor a;
  a.id = "aoi";
  const int h = static_cast<int>(history.size());
  for (int i = 0; i < h; ++i) {
    a.history.states.push_back({i - h + 1, history[static_cast<std::size_t>(i)], true});
  }
  Trajectory f;
  for (int i = 0; i < s.horizon; ++i) {
    f.states.push_back({i + 1, future[static_cast<std::size_t>(i)], true});
  }
  a.future_gt = f;
  s.actors.push_back(a);
  s.aoi_id = "aoi";
  validate_scene(s);
  return s;
}
}  // namespace

TEST_CASE("generated scenes are valid and stay on lanes")
{
  WorldSpec spec;
  spec.seed = 12;
  std::map<Topology, int> seen;
  for (std::size_t i = 0; i < 150; ++i) {
    const SimulatedScene sim = generate_scene(spec, i);
    ++seen[sim.topology];
    const Scene & s = sim.scene;
    CHECK_NOTHROW(validate_scene(s));
    CHECK(s.horizon == spec.horizon);
    CHECK(static_cast<int>(s.actors.size()) <= spec.max_actors);
    REQUIRE(s.aoi().future_gt.has_value());
    CHECK(static_cast<int>(s.aoi().future_gt->states.size()) == spec.horizon);
    CHECK(s.aoi().current() != nullptr);
    for (const auto & l : s.lanes) {
      for (const auto & succ : l.successors) {
        CHECK(distance(l.centerline.back(), lane(s, succ).centerline.front()) < 0.1);
      }
      for (std::size_t k = 0; k + 1 < l.centerline.size(); ++k) {
        CHECK(distance(l.centerline[k], l.centerline[k + 1]) <= spec.point_spacing + 1e-6);
      }
    }
    for (const auto & sa : sim.actors) {
      std::vector<Vec2> route_line;
      for (const auto & id : sa.route) {
        const auto & c = lane(s, id).centerline;
        route_line.insert(route_line.end(), c.begin(), c.end());
      }
      auto check = [&](const Trajectory & tr) {
        for (const auto & st : tr.states) {
          if (st.valid) {
            CHECK(distance_to_polyline(st.pos, route_line) <= 0.5);
          }
        }
      };
      check(sa.actor.history);
      if (sa.actor.future_gt) {
        check(*sa.actor.future_gt);
      }
      for (double v : sa.speed) {
        CHECK(v >= 0.0);
        CHECK(v <= spec.speed_limit);
      }
    }
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("intersections branch and straight worlds do not")
{
  WorldSpec spec;
  spec.topology_mix = {0.0, 0.0, 1.0, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GeneratedMap map = generate_map(spec, rng);
    CHECK(map.topology == Topology::Intersection);
    int branching = 0;
    for (const auto & l : map.lanes) {
      branching += l.successors.size() >= 2 ? 1 : 0;
    }
    CHECK(branching >= 1);
  }
  spec.topology_mix = {1.0, 0.0, 0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const GeneratedMap map = generate_map(spec, rng);
    CHECK(map.topology == Topology::Straight);
    for (const auto & l : map.lanes) {
      CHECK(l.successors.size() <= 1);
      CHECK(l.predecessors.size() <= 1);
    }
  }
  spec.topology_mix = {0.0, 0.0, 0.0, 1.0};
  Rng rng(3);
  const GeneratedMap merge = generate_map(spec, rng);
  int shared = 0;
  for (const auto & l : merge.lanes) {
    shared += l.predecessors.size() >= 2 ? 1 : 0;
  }
  CHECK(shared >= 1);
}

TEST_CASE("regeneration is bitwise identical")
{
  WorldSpec spec;
  spec.seed = 99;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(serialize_scene(generate_scene(spec, i).scene) == serialize_scene(generate_scene(spec, i).scene));
  }
  WorldSpec other = spec;
  other.seed = 100;
  CHECK(serialize_scene(generate_scene(spec, 0).scene) != serialize_scene(generate_scene(other, 0).scene));
}

TEST_CASE("branch endpoints are multimodal across seeds")
{
  WorldSpec spec;
  spec.topology_mix = {0.0, 0.0, 1.0, 0.0};
  spec.branch_ambiguity = 1.0;
  spec.coupling_prob = 0.0;
  std::map<std::string, int> exits;
  int branch_scenes = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    spec.seed = seed;
    const SimulatedScene sim = generate_scene(spec, 0);
    for (const auto & sa : sim.actors) {
      if (sa.actor.id != sim.scene.aoi_id || sa.route.size() < 2) {
        continue;
      }
      const LaneSegment & entry = lane(sim.scene, sa.route.front());
      if (entry.successors.size() < 2) {
        continue;
      }
      ++branch_scenes;
      const auto pos = std::find(entry.successors.begin(), entry.successors.end(), sa.route[1]);
      REQUIRE(pos != entry.successors.end());
      ++exits[pos == entry.successors.begin() ? "first" : "other"];
    }
  }
  REQUIRE(branch_scenes >= 100);
  double entropy = 0.0;
  for (const auto & [name, count] : exits) {
    const double p = static_cast<double>(count) / branch_scenes;
    entropy -= p * std::log(p);
  }
  CHECK(exits.size() == 2);
  CHECK(entropy > 0.5);
}

TEST_CASE("coupled followers repeat the leader speed after the configured delay")
{
  WorldSpec spec;
  spec.coupling_prob = 1.0;
  spec.jerk_std = 6.0;
  spec.brake_prob = 0.0;
  int followers = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    spec.seed = seed;
    const SimulatedScene sim = generate_scene(spec, 0);
    for (const auto & sa : sim.actors) {
      if (sa.leader < 0) {
        continue;
      }
      ++followers;
      const auto & lead = sim.actors[static_cast<std::size_t>(sa.leader)].speed;
      const auto & foll = sa.speed;
      REQUIRE(lead.size() == foll.size());
      // Lag minimizing the mean squared speed mismatch.
      int best_lag = -1;
      double best = 1e300;
      for (int lag = 0; lag <= 2 * spec.follower_delay; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        double acc = 0.0;
        for (std::size_t k = 0; k + l < foll.size(); ++k) {
          acc += (foll[k + l] - lead[k]) * (foll[k + l] - lead[k]);
        }
        acc /= static_cast<double>(foll.size() - l);
        if (acc < best) {
          best = acc;
          best_lag = lag;
        }
      }
      CHECK(best_lag == spec.follower_delay);
      for (std::size_t k = 0; k + static_cast<std::size_t>(spec.follower_delay) < foll.size(); ++k) {
        CHECK(foll[k + static_cast<std::size_t>(spec.follower_delay)] == lead[k]);
      }
    }
  }
  CHECK(followers >= 20);
}

TEST_CASE("braking actors decelerate monotonically during the horizon")
{
  WorldSpec spec;
  spec.brake_prob = 1.0;
  const int now = spec.history_steps - 1;
  int independent = 0;
  int stopped = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    spec.seed = seed;
    const SimulatedScene sim = generate_scene(spec, 0);
    for (const auto & sa : sim.actors) {
      if (sa.leader >= 0) {
        continue;
      }
      ++independent;
      const auto & v = sa.speed;
      const auto from = static_cast<std::size_t>(now + spec.horizon / 2 + 1);
      for (std::size_t k = from; k < v.size(); ++k) {
        CHECK(v[k] <= v[k - 1]);
        CHECK(v[k - 1] - v[k] <= spec.max_accel * spec.dt + 1e-12);
      }
      stopped += v.back() == 0.0 ? 1 : 0;
    }
  }
  CHECK(independent >= 60);
  CHECK(stopped > 0);
}

TEST_CASE("world spec validation and json")
{
  WorldSpec spec;
  CHECK_NOTHROW(spec.validate());
  CHECK(to_json(world_spec_from_json(to_json(spec))) == to_json(spec));
  WorldSpec bad = spec;
  bad.topology_mix = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.min_actors = 7;
  CHECK_THROWS(bad.validate());
  bad = spec;
  bad.brake_prob = 1.5;
  CHECK_THROWS(bad.validate());
  const WorldSpec partial = world_spec_from_json(nlohmann::json{{"n_scenes", 3}});
  CHECK(partial.n_scenes == 3);
  CHECK(partial.max_actors == spec.max_actors);
}

TEST_CASE("constant-velocity baseline")
{
  SUBCASE("constant velocity ground truth is exact")
  {
    const Vec2 v{1.5, -0.5};
    std::vector<Vec2> hist;
    std::vector<Vec2> fut;
    for (int t = -4; t <= 0; ++t) {
      hist.push_back(Vec2{3.0, 2.0} + v * t);
    }
    for (int t = 1; t <= 8; ++t) {
      fut.push_back(Vec2{3.0, 2.0} + v * t);
    }
    const Scene s = scene_with_aoi(hist, fut);
    const PredictionSet p = constant_velocity_baseline(s, 6);
    REQUIRE(p.actors.size() == 1);
    const auto & a = p.actors.front();
    CHECK(a.modes.size() == 6);
    for (double prob : a.probabilities) {
      CHECK(prob == doctest::Approx(1.0 / 6.0));
    }
    CHECK(min_fde(a, *s.aoi().future_gt, 6) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(min_ade(a, *s.aoi().future_gt, 1) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
  SUBCASE("stationary actor holds position")
  {
    const Scene s = scene_with_aoi({{4, 4}, {4, 4}, {4, 4}}, std::vector<Vec2>(5, {4, 4}));
    const PredictionSet p = constant_velocity_baseline(s, 3);
    for (const auto & mode : p.actors.front().modes) {
      for (const auto & q : mode) {
        CHECK(q == Vec2{4, 4});
      }
    }
  }
  SUBCASE("circular arc endpoint error matches the chord-versus-tangent formula")
  {
    const double r = 25.0;
    const double w = 0.05;
    const int h = 12;
    auto on_arc = [&](int t) { return Vec2{r * std::cos(w * t), r * std::sin(w * t)}; };
    std::vector<Vec2> hist = {on_arc(-2), on_arc(-1), on_arc(0)};
    std::vector<Vec2> fut;
    for (int t = 1; t <= h; ++t) {
      fut.push_back(on_arc(t));
    }
    const Scene s = scene_with_aoi(hist, fut);
    const PredictionSet p = constant_velocity_baseline(s, 6);
    // Extrapolating the last chord of length 2r sin(w/2) leaves the circle along a line at half-angle w/2.
    const double chord = 2.0 * r * std::sin(w / 2.0);
    const double phi = std::numbers::pi / 2.0 - w / 2.0;
    const Vec2 predicted{r + h * chord * std::cos(phi), h * chord * std::sin(phi)};
    const double expected = distance(predicted, on_arc(h));
    CHECK(expected > 1.0);
    CHECK(min_fde(p.actors.front(), *s.aoi().future_gt, 6) == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("a single history state is degenerate")
  {
    const Scene s = scene_with_aoi({{1, 1}}, {{2, 2}, {3, 3}});
    CHECK_THROWS_AS(constant_velocity_baseline(s, 6, true), DegenerateHistory);
    const PredictionSet p = constant_velocity_baseline(s, 6, false);
    CHECK(p.actors.front().modes.front().back() == Vec2{1, 1});
  }
  SUBCASE("history gaps scale the displacement")
  {
    Scene s = scene_with_aoi({{0, 0}, {0, 0}, {2, 0}}, {{3, 0}, {4, 0}});
    s.actors.front().history.states[1].valid = false;
    s.actors.front().history.states[0].pos = {0, 0};
    const PredictionSet p = constant_velocity_baseline(s, 1);
    CHECK(p.actors.front().modes.front().back().x == doctest::Approx(4.0));
  }
}

TEST_CASE("micro scene")
{
  const Scene s = make_micro_scene(5, 6);
  CHECK_NOTHROW(validate_scene(s, 5));
  CHECK(s.aoi_id == "ego");
  CHECK(s.find_actor("lead") != nullptr);
  CHECK(s.horizon == 6);
}

TEST_CASE("datasets")
{
  const fs::path dir = temp_dir("dataset");
  WorldSpec spec;
  spec.n_scenes = 10;
  spec.seed = 5;
  write_dataset(spec, (dir / "a").string());
  write_dataset(spec, (dir / "b").string());
  const DatasetManifest m = read_manifest((dir / "a").string());
  CHECK(m.files.size() == 10);
  CHECK(m.train == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(m.val == std::vector<std::size_t>{8, 9});
  for (const auto & f : m.files) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  const LoadedScenes val = load_split((dir / "a").string(), m, Split::Val);
  CHECK(val.scenes.size() == 2);
  CHECK(val.skipped.empty());
  CHECK(load_split((dir / "a").string(), m, Split::All).scenes.size() == 10);

  SUBCASE("one scene")
  {
    WorldSpec one = spec;
    one.n_scenes = 1;
    write_dataset(one, (dir / "one").string());
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto & e : fs::directory_iterator(dir / "one")) {
      ++entries;
    }
    CHECK(entries == 2);
    const DatasetManifest mo = read_manifest((dir / "one").string());
    CHECK(mo.train.size() + mo.val.size() == 1);
  }
  SUBCASE("malformed scenes are skipped")
  {
    std::ofstream(dir / "a" / m.files[9], std::ios::trunc) << "{\"id\": 3";
    const LoadedScenes loaded = load_split((dir / "a").string(), m, Split::Val);
    CHECK(loaded.scenes.size() == 1);
    REQUIRE(loaded.skipped.size() == 1);
    CHECK(loaded.skipped.front().find(m.files[9]) != std::string::npos);
  }
  SUBCASE("manifest errors")
  {
    CHECK_THROWS_AS(read_manifest((dir / "missing").string()), DataError);
    auto j = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
    j["version"] = 999;
    std::ofstream(dir / "b" / "manifest.json", std::ios::trunc) << j.dump();
    CHECK_THROWS_AS(read_manifest((dir / "b").string()), FormatVersionError);
    j["version"] = kDatasetFormatVersion;
    j["val"] = nlohmann::json::array({42});
    std::ofstream(dir / "b" / "manifest.json", std::ios::trunc) << j.dump();
    CHECK_THROWS_AS(read_manifest((dir / "b").string()), ReferenceError);
    std::ofstream(dir / "b" / "manifest.json", std::ios::trunc) << "[1,";
    CHECK_THROWS_AS(read_manifest((dir / "b").string()), SchemaError);
  }
}

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

#include "coop/graph.hpp"
#include "coop/rng.hpp"
#include "coop/synthetic.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace coop;
using Kind = ConnectionType::Kind;
using oracle::PairSet;

namespace
{
const TypedEdges & edges_of(const std::vector<TypedEdges> & all, Kind kind, int dilation = 1)
{
  for (const auto & e : all) {
    if (e.type.kind == kind && e.type.dilation == dilation) {
      return e;
    }
  }
  FAIL("missing connection type");
  return all.front();
}

PairSet as_set(const TypedEdges & e) { return PairSet(e.pairs.begin(), e.pairs.end()); }

LaneSegment straight_lane(const std::string & id, double y, int points, double x0 = 0.0)
{
  LaneSegment l;
  l.id = id;
  for (int k = 0; k < points; ++k) {
    l.centerline.push_back({x0 + 2.0 * k, y});
  }
  return l;
}

GraphNodes random_nodes(Rng & rng, std::size_t n, double extent)
{
  GraphNodes g;
  for (std::size_t i = 0; i < n; ++i) {
    g.positions.push_back({uniform(rng, -extent, extent), uniform(rng, -extent, extent)});
    g.raw_features.emplace_back();
    g.owner.push_back(static_cast<int>(i));
  }
  return g;
}
}  // namespace

TEST_CASE("single lane with three centerline points")
{
  const LaneGraph g = build_lane_graph({straight_lane("a", 0, 3)}, {1, 2});
  CHECK(g.nodes.size() == 2);
  CHECK(edges_of(g.edges, Kind::Self).pairs.size() == 2);
  CHECK(edges_of(g.edges, Kind::Pred).pairs == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(edges_of(g.edges, Kind::Succ).pairs == std::vector<std::pair<int, int>>{{1, 0}});
  CHECK(edges_of(g.edges, Kind::Pred, 2).pairs.empty());
  CHECK(g.nodes.positions[0] == Vec2{1.0, 0.0});
  CHECK(g.nodes.raw_features[0] == std::vector<double>{1.0, 0.0, 2.0, 0.0});
}

TEST_CASE("chain of ten nodes has six 4-hop pairs")
{
  // Two lanes of 6 and 4 segments joined head to tail form a 10-node chain.
  LaneSegment a = straight_lane("a", 0, 7);
  LaneSegment b = straight_lane("b", 0, 5, 12.0);
  a.successors = {"b"};
  b.predecessors = {"a"};
  const LaneGraph g = build_lane_graph({a, b}, {1, 2, 4, 8, 16, 32});
  REQUIRE(g.nodes.size() == 10);
  PairSet expected;
  for (int i = 0; i + 4 < 10; ++i) {
    expected.emplace(i, i + 4);
  }
  CHECK(as_set(edges_of(g.edges, Kind::Pred, 4)) == expected);
  CHECK(as_set(edges_of(g.edges, Kind::Succ, 4)) == oracle::swapped(expected));
  CHECK(edges_of(g.edges, Kind::Pred, 16).pairs.empty());
}

TEST_CASE("parallel lanes get left and right edges between aligned segments")
{
  LaneSegment a = straight_lane("a", 0, 5);
  LaneSegment b = straight_lane("b", 3.5, 5);
  a.left = {"b"};
  b.right = {"a"};
  const LaneGraph g = build_lane_graph({a, b}, {1});
  PairSet left;
  PairSet right;
  for (int i = 0; i < 4; ++i) {
    left.emplace(4 + i, i);
    right.emplace(i, 4 + i);
  }
  CHECK(as_set(edges_of(g.edges, Kind::Left)) == left);
  CHECK(as_set(edges_of(g.edges, Kind::Right)) == right);
}

TEST_CASE("dangling lane references are rejected")
{
  LaneSegment a = straight_lane("a", 0, 3);
  a.successors = {"zz"};
  CHECK_THROWS_AS(build_lane_graph({a}, {1}), ReferenceError);
}

TEST_CASE("path graphs")
{
  SUBCASE("one point")
  {
    const LaneGraph g = build_path_graph({Path{{{1, 1}}}}, {0}, {1, 2, 4, 8});
    CHECK(g.nodes.size() == 1);
    std::size_t total = 0;
    for (const auto & e : g.edges) {
      total += e.pairs.size();
    }
    CHECK(total == 1);
    CHECK(edges_of(g.edges, Kind::Self).pairs.size() == 1);
  }
  SUBCASE("nine points")
  {
    Path p;
    for (int k = 0; k < 9; ++k) {
      p.points.push_back({2.0 * k, 0.0});
    }
    const LaneGraph g = build_path_graph({p}, {0}, {1, 2, 4, 8});
    CHECK(edges_of(g.edges, Kind::Pred, 8).pairs == std::vector<std::pair<int, int>>{{0, 8}});
    CHECK(edges_of(g.edges, Kind::Succ, 8).pairs == std::vector<std::pair<int, int>>{{8, 0}});
    CHECK(g.nodes.raw_features[0] == std::vector<double>{0.0, 0.0, 2.0, 0.0});
    CHECK(g.nodes.raw_features[8] == std::vector<double>{16.0, 0.0, 0.0, 0.0});
  }
  SUBCASE("disjoint paths stay disconnected")
  {
    Path p{{{0, 0}, {2, 0}, {4, 0}}};
    Path q{{{0, 1}, {2, 1}, {4, 1}}};
    const LaneGraph g = build_path_graph({p, q}, {0, 1}, {1, 2, 4, 8});
    for (const auto & e : g.edges) {
      for (const auto & [s, d] : e.pairs) {
        CHECK((s < 3) == (d < 3));
      }
    }
  }
}

TEST_CASE("dilated edges equal exact k-hop reachability on random graphs")
{
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_lanes = 1 + static_cast<int>(uniform_index(rng, 6));
    std::vector<LaneSegment> lanes;
    for (int l = 0; l < n_lanes; ++l) {
      lanes.push_back(straight_lane("l" + std::to_string(l), 4.0 * l, 2 + static_cast<int>(uniform_index(rng, 8))));
    }
    for (int l = 0; l < n_lanes; ++l) {
      for (int m = 0; m < n_lanes; ++m) {
        if (uniform01(rng) < 0.3) {
          lanes[static_cast<std::size_t>(l)].successors.push_back(lanes[static_cast<std::size_t>(m)].id);
        }
      }
    }
    const std::vector<int> dilations{1, 2, 4, 8, 16, 32};
    const LaneGraph g = build_lane_graph(lanes, dilations);
    const auto next = oracle::lane_segment_successors(lanes);
    for (const int d : dilations) {
      const PairSet expected = oracle::matrix_power_pairs(next, d);
      CHECK(as_set(edges_of(g.edges, Kind::Pred, d)) == expected);
      CHECK(as_set(edges_of(g.edges, Kind::Succ, d)) == oracle::swapped(expected));
    }
  }
}

TEST_CASE("path graph dilations equal exact k-hop reachability on random paths")
{
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto paths = oracle::random_paths(rng, 4, 40);
    std::vector<int> owners(paths.size());
    const std::vector<int> dilations{1, 2, 4, 8};
    const LaneGraph g = build_path_graph(paths, owners, dilations);
    const auto next = oracle::path_point_successors(paths);
    REQUIRE(g.nodes.size() == next.size());
    for (const int d : dilations) {
      const PairSet expected = oracle::matrix_power_pairs(next, d);
      CHECK(as_set(edges_of(g.edges, Kind::Pred, d)) == expected);
      CHECK(as_set(edges_of(g.edges, Kind::Succ, d)) == oracle::swapped(expected));
    }
  }
}

TEST_CASE("trajectory nodes")
{
  Trajectory t;
  for (int j = 1; j <= 30; ++j) {
    t.states.push_back({j, {1.0 * j, 0.0}, true});
  }
  const GraphNodes n = build_trajectory_nodes({t, t}, {0, 2}, 30, 3);
  CHECK(n.size() == 20);
  CHECK(n.time_index.front() == 3);
  CHECK(n.time_index[9] == 30);
  CHECK(n.owner[10] == 2);
  CHECK(build_trajectory_nodes({}, {}, 30, 3).size() == 0);
  const GraphNodes all = build_trajectory_nodes({t}, {0}, 30, 1);
  CHECK(all.size() == 30);
  for (int j = 0; j < 30; ++j) {
    CHECK(all.time_index[static_cast<std::size_t>(j)] == j + 1);
  }
}

TEST_CASE("actor graph proximity")
{
  auto actor_at = [](const std::string & id, double x) {
    Actor a;
    a.id = id;
    a.history.states = {{0, {x, 0.0}, true}};
    return a;
  };
  const LaneGraph near = build_actor_graph({actor_at("a", 0), actor_at("b", 50)}, 100.0);
  CHECK(edges_of(near.edges, Kind::Near).pairs.size() == 2);
  CHECK(edges_of(near.edges, Kind::Self).pairs.size() == 2);
  const LaneGraph far = build_actor_graph({actor_at("a", 0), actor_at("b", 150)}, 100.0);
  CHECK(edges_of(far.edges, Kind::Near).pairs.empty());

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Actor> actors;
    const std::size_t n = 1 + uniform_index(rng, 12);
    for (std::size_t i = 0; i < n; ++i) {
      Actor a;
      a.id = std::to_string(i);
      a.history.states = {{0, {uniform(rng, -120, 120), uniform(rng, -120, 120)}, true}};
      actors.push_back(a);
    }
    PairSet expected;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && std::hypot(actors[i].history.states[0].pos.x - actors[j].history.states[0].pos.x,
                                 actors[i].history.states[0].pos.y - actors[j].history.states[0].pos.y) < 100.0) {
          expected.emplace(static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
    CHECK(as_set(edges_of(build_actor_graph(actors, 100.0).edges, Kind::Near)) == expected);
  }
}

TEST_CASE("cross edge examples")
{
  GraphNodes src;
  src.positions = {{0, 0}};
  src.owner = {0};
  GraphNodes dst;
  dst.positions = {{3, 4}};
  dst.owner = {0};
  const CrossEdges e = build_cross_edges(src, dst, Relation::L2A, 7.0, 30);
  REQUIRE(e.size() == 1);
  CHECK(e.features[0] == std::vector<double>{3.0, 4.0, 5.0});
  CHECK(build_cross_edges(src, dst, Relation::L2A, 4.0, 30).size() == 0);

  GraphNodes traj = src;
  traj.time_index = {15};
  const CrossEdges t = build_cross_edges(traj, dst, Relation::T2A, 100.0, 30);
  REQUIRE(t.size() == 1);
  CHECK(t.features[0][3] == 0.5);
  CHECK(t.feature_dim() == 4);
}

TEST_CASE("P2A edges join path points to their own actor only")
{
  GraphNodes path;
  path.positions = {{0, 0}, {500, 0}, {1, 1}};
  path.owner = {1, 1, 0};
  GraphNodes actors;
  actors.positions = {{0, 0}, {0, 0}};
  actors.owner = {0, 1};
  const CrossEdges e = build_cross_edges(path, actors, Relation::P2A, 7.0, 30);
  CHECK(e.src == std::vector<int>{0, 1, 2});
  CHECK(e.dst == std::vector<int>{1, 1, 0});
}

TEST_CASE("cross edges equal brute-force thresholding")
{
  Rng rng(31);
  const Relation relations[] = {Relation::L2A, Relation::A2L, Relation::L2P, Relation::T2L, Relation::A2A, Relation::T2A};
  for (int trial = 0; trial < 60; ++trial) {
    const Relation r = relations[trial % 6];
    GraphNodes src = random_nodes(rng, 1 + uniform_index(rng, 25), 20.0);
    const GraphNodes dst = random_nodes(rng, 1 + uniform_index(rng, 25), 20.0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      src.time_index.push_back(1 + static_cast<int>(uniform_index(rng, 30)));
    }
    const double threshold = uniform(rng, 2.0, 30.0);
    const CrossEdges e = build_cross_edges(src, dst, r, threshold, 30);
    std::set<std::pair<int, int>> got;
    for (std::size_t k = 0; k < e.size(); ++k) {
      got.emplace(e.src[k], e.dst[k]);
      const auto & f = e.features[k];
      const Vec2 d = dst.positions[static_cast<std::size_t>(e.dst[k])] - src.positions[static_cast<std::size_t>(e.src[k])];
      CHECK(f[0] == d.x);
      CHECK(f[1] == d.y);
      CHECK(std::abs(f[2] - std::sqrt(f[0] * f[0] + f[1] * f[1])) <= 1e-9);
      if (r == Relation::T2L || r == Relation::T2A) {
        REQUIRE(f.size() == 4);
        CHECK(f[3] == src.time_index[static_cast<std::size_t>(e.src[k])] / 30.0);
        CHECK(f[3] > 0.0);
        CHECK(f[3] <= 1.0);
      } else {
        CHECK(f.size() == 3);
      }
    }
    std::set<std::pair<int, int>> expected;
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t j = 0; j < dst.size(); ++j) {
        const double dx = src.positions[i].x - dst.positions[j].x;
        const double dy = src.positions[i].y - dst.positions[j].y;
        if (std::sqrt(dx * dx + dy * dy) < threshold) {
          expected.emplace(static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
    CHECK(got == expected);
  }
}

TEST_CASE("encode_actor_sequence")
{
  Actor a;
  a.id = "a";
  for (int t = -3; t <= 0; ++t) {
    a.history.states.push_back({t, {1.0 * t, 2.0}, true});
  }
  const auto rows = encode_actor_sequence(a, nullptr, 4, 3);
  REQUIRE(rows.size() == 7);
  for (int i = 1; i < 4; ++i) {
    CHECK(rows[static_cast<std::size_t>(i)] == std::array<double, 3>{1.0, 0.0, 1.0});
  }
  for (int i = 4; i < 7; ++i) {
    CHECK(rows[static_cast<std::size_t>(i)] == std::array<double, 3>{0.0, 0.0, 0.0});
  }

  Actor still = a;
  for (auto & s : still.history.states) {
    s.pos = {5.0, 5.0};
  }
  for (const auto & r : encode_actor_sequence(still, nullptr, 4, 3)) {
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
  }

  Trajectory future{{{1, {0.5, 2.5}, true}, {2, {1.5, 3.0}, true}, {3, {3.0, 3.0}, true}}};
  const auto coop = encode_actor_sequence(a, &future, 4, 3);
  CHECK(coop[4] == std::array<double, 3>{0.5, 0.5, 1.0});
  CHECK(coop[5] == std::array<double, 3>{1.0, 0.5, 1.0});
  CHECK(coop[6] == std::array<double, 3>{1.5, 0.0, 1.0});

  Actor gap = a;
  gap.history.states[1].valid = false;
  const auto g = encode_actor_sequence(gap, nullptr, 4, 3);
  CHECK(g[1] == std::array<double, 3>{0.0, 0.0, 0.0});
}

TEST_CASE("bundles are deterministic and trajectory nodes carry no intra edges")
{
  WorldSpec spec;
  spec.seed = 12;
  for (std::size_t i = 0; i < 20; ++i) {
    const Scene s = normalize_frame(generate_scene(spec, i).scene);
    Rng rng(i);
    auto assignment = sample_roles(s, 1.0, 0.5, true, rng);
    sample_betas(assignment, rng);
    const AugmentedScene aug = apply_assignment(s, assignment);
    const GraphConfig config;
    const GraphBundle a = build_graph_bundle(aug, config);
    const GraphBundle b = build_graph_bundle(aug, config);
    CHECK(dump_bundle(a) == dump_bundle(b));
    CHECK(a.trajectories.size() == aug.coop_trajectories.size() * 10);
    CHECK(a.predict_set.size() == aug.predict_set.size());
    CHECK(a.sequences.size() == s.actors.size() * 50);
  }
}

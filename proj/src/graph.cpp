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

#include "coop/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace coop
{
std::string ConnectionType::name() const
{
  switch (kind) {
    case Kind::Self:
      return "self";
    case Kind::Pred:
      return dilation == 1 ? "pred" : "pred_dil" + std::to_string(dilation);
    case Kind::Succ:
      return dilation == 1 ? "succ" : "succ_dil" + std::to_string(dilation);
    case Kind::Left:
      return "left";
    case Kind::Right:
      return "right";
    case Kind::Near:
      return "near";
  }
  return "?";
}

const char * to_string(Relation r)
{
  switch (r) {
    case Relation::L2A:
      return "L2A";
    case Relation::A2L:
      return "A2L";
    case Relation::L2L:
      return "L2L";
    case Relation::A2A:
      return "A2A";
    case Relation::L2P:
      return "L2P";
    case Relation::P2A:
      return "P2A";
    case Relation::P2P:
      return "P2P";
    case Relation::T2L:
      return "T2L";
    case Relation::T2A:
      return "T2A";
  }
  return "?";
}

std::size_t CrossEdges::feature_dim() const
{
  return (relation == Relation::T2L || relation == Relation::T2A) ? 4 : 3;
}

double GraphConfig::threshold(Relation r) const
{
  auto it = thresholds.find(r);
  if (it == thresholds.end()) {
    throw ConfigError(std::string("no threshold configured for ") + to_string(r));
  }
  return it->second;
}

const CrossEdges & GraphBundle::edges(Relation r) const
{
  auto it = cross.find(r);
  if (it == cross.end()) {
    throw ConfigError(std::string("bundle has no ") + to_string(r) + " edges");
  }
  return it->second;
}

std::vector<std::vector<int>> exact_hop_targets(const std::vector<std::vector<int>> & next, int hops)
{
  const std::size_t n = next.size();
  std::vector<std::vector<int>> out(n);
  std::vector<char> in_frontier(n, 0);
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<int> frontier{static_cast<int>(start)};
    for (int h = 0; h < hops && !frontier.empty(); ++h) {
      std::vector<int> step;
      for (const int u : frontier) {
        for (const int v : next[static_cast<std::size_t>(u)]) {
          if (!in_frontier[static_cast<std::size_t>(v)]) {
            in_frontier[static_cast<std::size_t>(v)] = 1;
            step.push_back(v);
          }
        }
      }
      for (const int v : step) {
        in_frontier[static_cast<std::size_t>(v)] = 0;
      }
      frontier = std::move(step);
    }
    std::sort(frontier.begin(), frontier.end());
    out[start] = std::move(frontier);
  }
  return out;
}

namespace
{
void sort_pairs(TypedEdges & e)
{
  std::sort(e.pairs.begin(), e.pairs.end());
  e.pairs.erase(std::unique(e.pairs.begin(), e.pairs.end()), e.pairs.end());
}

/// self, pred/succ for every dilation, in that order.
std::vector<TypedEdges> chain_edges(
  const std::vector<std::vector<int>> & next, const std::vector<int> & dilations)
{
  using Kind = ConnectionType::Kind;
  std::vector<TypedEdges> out;
  TypedEdges self{{Kind::Self, 1}, {}};
  for (std::size_t i = 0; i < next.size(); ++i) {
    self.pairs.emplace_back(static_cast<int>(i), static_cast<int>(i));
  }
  out.push_back(std::move(self));
  for (const int n : dilations) {
    if (n < 1) {
      throw ConfigError("dilation sizes must be >= 1");
    }
    const auto targets = exact_hop_targets(next, n);
    TypedEdges pred{{Kind::Pred, n}, {}};
    TypedEdges succ{{Kind::Succ, n}, {}};
    for (std::size_t u = 0; u < targets.size(); ++u) {
      for (const int v : targets[u]) {
        pred.pairs.emplace_back(static_cast<int>(u), v);  // u is the n-hop predecessor of v
        succ.pairs.emplace_back(v, static_cast<int>(u));  // v is the n-hop successor of u
      }
    }
    sort_pairs(pred);
    sort_pairs(succ);
    out.push_back(std::move(pred));
    out.push_back(std::move(succ));
  }
  return out;
}

}  // namespace

LaneGraph build_lane_graph(const std::vector<LaneSegment> & lanes, const std::vector<int> & dilations)
{
  using Kind = ConnectionType::Kind;
  LaneGraph g;
  g.nodes.kind = NodeKind::Lane;
  std::unordered_map<std::string, std::size_t> lane_index;
  std::vector<int> first(lanes.size()), last(lanes.size());
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    lane_index[lanes[l].id] = l;
    const auto & cl = lanes[l].centerline;
    first[l] = static_cast<int>(g.nodes.size());
    for (std::size_t k = 0; k + 1 < cl.size(); ++k) {
      const Vec2 mid = (cl[k] + cl[k + 1]) * 0.5;
      const Vec2 dir = cl[k + 1] - cl[k];
      g.nodes.positions.push_back(mid);
      g.nodes.raw_features.push_back({mid.x, mid.y, dir.x, dir.y});
      g.nodes.owner.push_back(static_cast<int>(l));
    }
    last[l] = static_cast<int>(g.nodes.size()) - 1;
  }

  std::vector<std::vector<int>> next(g.nodes.size());
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    for (int i = first[l]; i < last[l]; ++i) {
      next[static_cast<std::size_t>(i)].push_back(i + 1);
    }
    for (const auto & s : lanes[l].successors) {
      auto it = lane_index.find(s);
      if (it == lane_index.end()) {
        throw ReferenceError("lane '" + lanes[l].id + "' successor '" + s + "' not in map");
      }
      next[static_cast<std::size_t>(last[l])].push_back(first[it->second]);
    }
    for (const auto & p : lanes[l].predecessors) {
      auto it = lane_index.find(p);
      if (it == lane_index.end()) {
        throw ReferenceError("lane '" + lanes[l].id + "' predecessor '" + p + "' not in map");
      }
      next[static_cast<std::size_t>(last[it->second])].push_back(first[l]);
    }
  }
  for (auto & n : next) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  g.edges = chain_edges(next, dilations);

  // Each segment links to the nearest-midpoint segment of every left/right neighbor lane.
  auto side_edges = [&](Kind kind, auto member) {
    TypedEdges e{{kind, 1}, {}};
    for (std::size_t l = 0; l < lanes.size(); ++l) {
      for (const auto & nid : lanes[l].*member) {
        auto it = lane_index.find(nid);
        if (it == lane_index.end()) {
          throw ReferenceError("lane '" + lanes[l].id + "' neighbor '" + nid + "' not in map");
        }
        const std::size_t m = it->second;
        for (int i = first[l]; i <= last[l]; ++i) {
          int best = -1;
          double best_d = std::numeric_limits<double>::infinity();
          for (int j = first[m]; j <= last[m]; ++j) {
            const double d = distance(
              g.nodes.positions[static_cast<std::size_t>(i)],
              g.nodes.positions[static_cast<std::size_t>(j)]);
            if (d < best_d) {
              best_d = d;
              best = j;
            }
          }
          e.pairs.emplace_back(best, i);
        }
      }
    }
    sort_pairs(e);
    return e;
  };
  g.edges.push_back(side_edges(Kind::Left, &LaneSegment::left));
  g.edges.push_back(side_edges(Kind::Right, &LaneSegment::right));
  return g;
}

LaneGraph build_path_graph(
  const std::vector<Path> & paths, const std::vector<int> & owners, const std::vector<int> & dilations)
{
  if (owners.size() != paths.size()) {
    throw ConfigError("build_path_graph: one owner per path required");
  }
  LaneGraph g;
  g.nodes.kind = NodeKind::Path;
  std::vector<std::vector<int>> next;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto & pts = paths[p].points;
    const int base = static_cast<int>(g.nodes.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const Vec2 dir = k + 1 < pts.size() ? pts[k + 1] - pts[k] : Vec2{0.0, 0.0};
      g.nodes.positions.push_back(pts[k]);
      g.nodes.raw_features.push_back({pts[k].x, pts[k].y, dir.x, dir.y});
      g.nodes.owner.push_back(owners[p]);
      next.emplace_back();
      if (k + 1 < pts.size()) {
        next.back().push_back(base + static_cast<int>(k) + 1);
      }
    }
  }
  g.edges = chain_edges(next, dilations);
  return g;
}

GraphNodes build_trajectory_nodes(
  const std::vector<Trajectory> & trajectories, const std::vector<int> & owners, int horizon,
  int subsample)
{
  if (subsample < 1) {
    throw ConfigError("trajectory subsample must be >= 1");
  }
  if (owners.size() != trajectories.size()) {
    throw ConfigError("build_trajectory_nodes: one owner per trajectory required");
  }
  GraphNodes nodes;
  nodes.kind = NodeKind::Trajectory;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    for (int j = subsample; j <= horizon; j += subsample) {
      const ActorState * s = trajectories[i].at(j);
      if (s == nullptr || !s->valid) {
        continue;
      }
      nodes.positions.push_back(s->pos);
      nodes.raw_features.emplace_back();
      nodes.owner.push_back(owners[i]);
      nodes.time_index.push_back(j);
    }
  }
  return nodes;
}

LaneGraph build_actor_graph(const std::vector<Actor> & actors, double threshold)
{
  using Kind = ConnectionType::Kind;
  LaneGraph g;
  g.nodes.kind = NodeKind::Actor;
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const ActorState * now = actors[i].current();
    if (now == nullptr || !now->valid) {
      throw ValueError("actor '" + actors[i].id + "' has no valid state at t=0");
    }
    g.nodes.positions.push_back(now->pos);
    g.nodes.raw_features.emplace_back();
    g.nodes.owner.push_back(static_cast<int>(i));
  }
  TypedEdges self{{Kind::Self, 1}, {}};
  TypedEdges near{{Kind::Near, 1}, {}};
  const int n = static_cast<int>(g.nodes.size());
  for (int i = 0; i < n; ++i) {
    self.pairs.emplace_back(i, i);
    for (int j = 0; j < n; ++j) {
      if (i != j &&
          distance(g.nodes.positions[static_cast<std::size_t>(i)],
                   g.nodes.positions[static_cast<std::size_t>(j)]) < threshold) {
        near.pairs.emplace_back(i, j);
      }
    }
  }
  g.edges.push_back(std::move(self));
  g.edges.push_back(std::move(near));
  return g;
}

CrossEdges build_cross_edges(
  const GraphNodes & src, const GraphNodes & dst, Relation relation, double threshold, int horizon)
{
  CrossEdges e;
  e.relation = relation;
  const bool timed = relation == Relation::T2L || relation == Relation::T2A;
  if (timed && src.time_index.size() != src.size()) {
    throw ConfigError(std::string(to_string(relation)) + " requires trajectory source nodes");
  }
  auto add = [&](std::size_t i, std::size_t j) {
    const Vec2 d = dst.positions[j] - src.positions[i];
    std::vector<double> f{d.x, d.y, std::sqrt(d.x * d.x + d.y * d.y)};
    if (timed) {
      f.push_back(static_cast<double>(src.time_index[i]) / static_cast<double>(horizon));
    }
    e.src.push_back(static_cast<int>(i));
    e.dst.push_back(static_cast<int>(j));
    e.features.push_back(std::move(f));
  };
  if (relation == Relation::P2A) {
    for (std::size_t i = 0; i < src.size(); ++i) {
      const int owner = src.owner[i];
      if (owner >= 0 && static_cast<std::size_t>(owner) < dst.size()) {
        add(i, static_cast<std::size_t>(owner));
      }
    }
    return e;
  }
  const bool same_set = relation == Relation::L2L;
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < dst.size(); ++j) {
      if (same_set && i == j) {
        continue;
      }
      if (distance(src.positions[i], dst.positions[j]) < threshold) {
        add(i, j);
      }
    }
  }
  return e;
}

std::vector<std::array<double, 3>> encode_actor_sequence(
  const Actor & actor, const Trajectory * coop_future, int history_steps, int horizon)
{
  std::vector<std::array<double, 3>> rows;
  rows.reserve(static_cast<std::size_t>(history_steps + horizon));
  const ActorState * prev = nullptr;
  for (int t = -history_steps + 1; t <= horizon; ++t) {
    const ActorState * s = nullptr;
    if (t <= 0) {
      s = actor.history.at(t);
    } else if (coop_future != nullptr) {
      s = coop_future->at(t);
    }
    if (s != nullptr && !s->valid) {
      s = nullptr;
    }
    std::array<double, 3> row{0.0, 0.0, 0.0};
    if (s != nullptr) {
      row[2] = 1.0;
      if (prev != nullptr) {
        row[0] = s->pos.x - prev->pos.x;
        row[1] = s->pos.y - prev->pos.y;
      }
    }
    rows.push_back(row);
    prev = s;
  }
  return rows;
}

GraphBundle build_graph_bundle(const AugmentedScene & aug, const GraphConfig & config)
{
  const Scene & scene = aug.base;
  GraphBundle b;
  b.history_steps = config.history_steps;
  b.horizon = config.horizon;
  if (scene.horizon != config.horizon) {
    throw ConfigError(
      "scene '" + scene.id + "' horizon " + std::to_string(scene.horizon) +
      " does not match model horizon " + std::to_string(config.horizon));
  }

  LaneGraph actor_graph = build_actor_graph(scene.actors, config.threshold(Relation::A2A));
  b.actors = std::move(actor_graph.nodes);
  b.actor_edges = std::move(actor_graph.edges);

  LaneGraph lane_graph = build_lane_graph(scene.lanes, config.lane_dilations);
  b.lanes = std::move(lane_graph.nodes);
  b.lane_edges = std::move(lane_graph.edges);

  std::vector<Path> paths;
  std::vector<int> path_owners;
  std::vector<Trajectory> trajs;
  std::vector<int> traj_owners;
  for (std::size_t i = 0; i < scene.actors.size(); ++i) {
    const Actor & a = scene.actors[i];
    b.actor_ids.push_back(a.id);
    const Trajectory * coop = nullptr;
    if (auto it = aug.coop_trajectories.find(a.id); it != aug.coop_trajectories.end()) {
      coop = &it->second;
      trajs.push_back(it->second);
      traj_owners.push_back(static_cast<int>(i));
    }
    if (auto it = aug.coop_paths.find(a.id); it != aug.coop_paths.end()) {
      paths.push_back(it->second);
      path_owners.push_back(static_cast<int>(i));
    }
    auto rows = encode_actor_sequence(a, coop, config.history_steps, config.horizon);
    b.sequences.insert(b.sequences.end(), rows.begin(), rows.end());
  }
  for (const auto & id : aug.predict_set) {
    const int idx = scene.actor_index(id);
    if (idx < 0) {
      throw ReferenceError("predict_set references unknown actor '" + id + "'");
    }
    b.predict_set.push_back(idx);
  }
  std::sort(b.predict_set.begin(), b.predict_set.end());

  LaneGraph path_graph = build_path_graph(paths, path_owners, config.path_dilations);
  b.paths = std::move(path_graph.nodes);
  b.path_edges = std::move(path_graph.edges);
  b.trajectories =
    build_trajectory_nodes(trajs, traj_owners, config.horizon, config.trajectory_subsample);

  const int h = config.horizon;
  auto put = [&](Relation r, const GraphNodes & src, const GraphNodes & dst) {
    b.cross[r] = build_cross_edges(src, dst, r, config.threshold(r), h);
  };
  put(Relation::L2P, b.lanes, b.paths);
  put(Relation::P2A, b.paths, b.actors);
  put(Relation::A2L, b.actors, b.lanes);
  put(Relation::L2L, b.lanes, b.lanes);
  put(Relation::T2L, b.trajectories, b.lanes);
  put(Relation::L2A, b.lanes, b.actors);
  put(Relation::A2A, b.actors, b.actors);
  put(Relation::T2A, b.trajectories, b.actors);
  return b;
}

std::string dump_bundle(const GraphBundle & b)
{
  using nlohmann::json;
  auto nodes_json = [](const GraphNodes & n) {
    json arr = json::array();
    for (std::size_t i = 0; i < n.size(); ++i) {
      json node{{"x", n.positions[i].x}, {"y", n.positions[i].y}, {"owner", n.owner[i]}};
      if (!n.time_index.empty()) {
        node["t"] = n.time_index[i];
      }
      arr.push_back(std::move(node));
    }
    return arr;
  };
  auto typed_json = [](const std::vector<TypedEdges> & edges) {
    json obj = json::object();
    for (const auto & e : edges) {
      obj[e.type.name()] = e.pairs;
    }
    return obj;
  };
  json doc;
  doc["actor_ids"] = b.actor_ids;
  doc["predict_set"] = b.predict_set;
  doc["nodes"] = {
    {"actor", nodes_json(b.actors)},
    {"lane", nodes_json(b.lanes)},
    {"trajectory", nodes_json(b.trajectories)},
    {"path", nodes_json(b.paths)}};
  doc["edges"] = {
    {"actor", typed_json(b.actor_edges)},
    {"lane", typed_json(b.lane_edges)},
    {"path", typed_json(b.path_edges)}};
  json cross = json::object();
  for (const auto & [rel, e] : b.cross) {
    json list = json::array();
    for (std::size_t k = 0; k < e.size(); ++k) {
      list.push_back({{"src", e.src[k]}, {"dst", e.dst[k]}, {"features", e.features[k]}});
    }
    cross[to_string(rel)] = std::move(list);
  }
  doc["cross"] = std::move(cross);
  return doc.dump(2);
}

}  // namespace coop

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

#ifndef COOP__GRAPH_HPP_
#define COOP__GRAPH_HPP_

#include "coop/augmentation.hpp"
#include "coop/scene.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace coop
{
enum class NodeKind { Actor, Lane, Trajectory, Path };

/// Node set of one of the four graphs.
struct GraphNodes
{
  NodeKind kind{NodeKind::Actor};
  std::vector<Vec2> positions;
  std::vector<std::vector<double>> raw_features;  //!< Empty rows for actor/trajectory nodes.
  std::vector<int> owner;       //!< Actor index (actor/trajectory/path) or lane index (lane).
  std::vector<int> time_index;  //!< Trajectory nodes only, in [1, H].

  std::size_t size() const { return positions.size(); }
};

/// Intra-graph connection type. An edge (src, dst) of type c means src is in N_c(dst).
struct ConnectionType
{
  enum class Kind { Self, Pred, Succ, Left, Right, Near };
  Kind kind{Kind::Self};
  int dilation{1};  //!< n-hop distance for Pred/Succ; 1 elsewhere.

  std::string name() const;
  auto operator<=>(const ConnectionType &) const = default;
};

struct TypedEdges
{
  ConnectionType type;
  std::vector<std::pair<int, int>> pairs;  //!< (src, dst), sorted
};

enum class Relation { L2A, A2L, L2L, A2A, L2P, P2A, P2P, T2L, T2A };

const char * to_string(Relation r);

/// Directed proximity edges between two node sets; messages flow src -> dst.
struct CrossEdges
{
  Relation relation{Relation::A2A};
  std::vector<int> src;
  std::vector<int> dst;
  /// [dx, dy, dist] with d = dst - src, plus t_j/H for T2L and T2A.
  std::vector<std::vector<double>> features;

  std::size_t size() const { return src.size(); }
  std::size_t feature_dim() const;
};

struct GraphConfig
{
  int history_steps{kDefaultHistorySteps};
  int horizon{kDefaultHorizon};
  std::vector<int> lane_dilations{1, 2, 4, 8, 16, 32};
  std::vector<int> path_dilations{1, 2, 4, 8};
  int trajectory_subsample{3};
  std::map<Relation, double> thresholds{
    {Relation::L2A, 7.0}, {Relation::A2L, 7.0}, {Relation::L2P, 7.0}, {Relation::P2A, 7.0},
    {Relation::T2L, 7.0}, {Relation::L2L, 6.0}, {Relation::A2A, 100.0}, {Relation::T2A, 100.0}};

  double threshold(Relation r) const;
};

struct LaneGraph
{
  GraphNodes nodes;
  std::vector<TypedEdges> edges;
};

/// Full heterogeneous graph for one augmented scene.
struct GraphBundle
{
  GraphNodes actors;
  GraphNodes lanes;
  GraphNodes trajectories;
  GraphNodes paths;
  std::vector<TypedEdges> lane_edges;
  std::vector<TypedEdges> path_edges;
  std::vector<TypedEdges> actor_edges;
  std::map<Relation, CrossEdges> cross;

  std::vector<std::string> actor_ids;
  std::vector<int> predict_set;  //!< Indices into actors, ascending.
  int history_steps{0};
  int horizon{0};
  /// Encoded [dx, dy, avail] rows, actor-major, (history_steps + horizon) rows per actor.
  std::vector<std::array<double, 3>> sequences;

  int sequence_length() const { return history_steps + horizon; }
  const CrossEdges & edges(Relation r) const;
};

/// Lane nodes are centerline segments positioned at their midpoints.
LaneGraph build_lane_graph(const std::vector<LaneSegment> & lanes, const std::vector<int> & dilations);

/// One chain per path; no edges between different paths. `owners` gives the actor index per path.
LaneGraph build_path_graph(
  const std::vector<Path> & paths, const std::vector<int> & owners, const std::vector<int> & dilations);

/// Trajectory nodes at j = s, 2s, ... <= H for each cooperative trajectory.
GraphNodes build_trajectory_nodes(
  const std::vector<Trajectory> & trajectories, const std::vector<int> & owners, int horizon,
  int subsample = 3);

/// Actor nodes at t=0 with self edges and undirected proximity edges below `threshold`.
LaneGraph build_actor_graph(const std::vector<Actor> & actors, double threshold = 100.0);

/// Directed proximity edges src -> dst with distance < threshold (P2A: path point -> owner).
CrossEdges build_cross_edges(
  const GraphNodes & src, const GraphNodes & dst, Relation relation, double threshold, int horizon);

/// Exact n-hop reachability along the directed "next" relation.
std::vector<std::vector<int>> exact_hop_targets(
  const std::vector<std::vector<int>> & next, int hops);

/// [dx, dy, avail] rows for t = -T_hist+1 .. H.
std::vector<std::array<double, 3>> encode_actor_sequence(
  const Actor & actor, const Trajectory * coop_future, int history_steps, int horizon);

GraphBundle build_graph_bundle(const AugmentedScene & scene, const GraphConfig & config);

/// JSON debug dump of nodes and edges.
std::string dump_bundle(const GraphBundle & bundle);

}  // namespace coop

#endif  // COOP__GRAPH_HPP_

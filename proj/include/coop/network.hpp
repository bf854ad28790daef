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

#ifndef COOP__NETWORK_HPP_
#define COOP__NETWORK_HPP_

#include "coop/autodiff/ops.hpp"
#include "coop/graph.hpp"
#include "coop/rng.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace coop
{
struct ModelConfig
{
  int feature_dim{256};
  int modes{6};
  int heads{8};
  int tcn_layers{3};
  int tcn_kernel{3};
  int laneconv_stack{4};
  int fusion_stack{2};
  int mlp_hidden{4096};
  int history_steps{kDefaultHistorySteps};
  int horizon{kDefaultHorizon};
  int trajectory_subsample{3};
  std::vector<int> lane_dilations{1, 2, 4, 8, 16, 32};
  std::vector<int> path_dilations{1, 2, 4, 8};
  std::map<Relation, double> thresholds{GraphConfig{}.thresholds};
  /// Multiplies map coordinates and edge offsets before they enter the network.
  double input_scale{0.1};

  /// d=32, mlp_hidden=256, heads=4.
  static ModelConfig desk();

  void validate() const;
  GraphConfig graph_config() const;
};

nlohmann::json to_json(const ModelConfig & config);
/// Fields missing from `j` keep their value from `base`.
ModelConfig model_config_from_json(const nlohmann::json & j, const ModelConfig & base = {});

/// Connection types of the lane graph, then "near" for L2L; path types for P2P.
std::vector<ConnectionType> lane_connection_types(const ModelConfig & config);
std::vector<ConnectionType> path_connection_types(const ModelConfig & config);
std::vector<ConnectionType> l2l_connection_types(const ModelConfig & config);

/// Fusion relations in execution order.
const std::vector<Relation> & fusion_order();

/// Fan-in uniform weights, zero biases, unit norm gains.
template <typename T>
ad::ParamStore<T> init_params(const ModelConfig & config, std::uint64_t seed);

/// Differentiable outputs for the actors in `actors` (indices into the bundle's actor nodes).
template <typename T>
struct ForwardOutput
{
  ad::Var<T> trajectories;  //!< n x (M*H*2), per mode [x1, y1, x2, y2, ...] in the bundle frame
  ad::Var<T> logits;        //!< n x M
  std::vector<int> actors;
};

/// Optional intermediate values for tests and debugging.
template <typename T>
struct ForwardTrace
{
  std::map<std::string, ad::Var<T>> attention;  //!< "<relation>.<layer>" -> edges x heads
  ad::Var<T> actor_features;
  ad::Var<T> lane_features;
};

template <typename T>
ForwardOutput<T> forward(ad::Tape<T> & tape, const ad::ParamStore<T> & params, const ModelConfig & config,
                         const GraphBundle & bundle, ForwardTrace<T> * trace = nullptr);

// Layer building blocks, exposed for gradient checks and oracle tests.

template <typename T>
ad::Var<T> lane_conv_layer(ad::Tape<T> & tape, const ad::ParamStore<T> & params, const std::string & prefix,
                           const ad::Var<T> & x, const std::vector<TypedEdges> & edges);

/// Pre-normalisation sum over connection types of A_c X W_c.
template <typename T>
ad::Var<T> lane_conv_aggregate(ad::Tape<T> & tape, const ad::ParamStore<T> & params, const std::string & prefix,
                               const ad::Var<T> & x, const std::vector<TypedEdges> & edges);

template <typename T>
ad::Var<T> gatv2_layer(ad::Tape<T> & tape, const ad::ParamStore<T> & params, const std::string & prefix,
                       const ad::Var<T> & dst, const ad::Var<T> & src, const CrossEdges & edges, int heads,
                       T input_scale, ad::Var<T> * attention = nullptr);

/// Rows are actor-major sequences of `sequence_length` steps; returns the same rows with d columns.
template <typename T>
ad::Var<T> tcn_forward(ad::Tape<T> & tape, const ad::ParamStore<T> & params, const ModelConfig & config,
                       const ad::Var<T> & sequences, int sequence_length);

/// Parameters of a single LaneConv block / GATv2 block, used by tests and the gradcheck suite.
template <typename T>
void add_lane_conv_params(ad::ParamStore<T> & store, Rng & rng, const std::string & prefix, int dim,
                          const std::vector<ConnectionType> & types);
template <typename T>
void add_gatv2_params(ad::ParamStore<T> & store, Rng & rng, const std::string & prefix, int dim, int heads,
                      int edge_features);

struct ActorPrediction
{
  std::string actor_id;
  std::vector<std::vector<Vec2>> modes;  //!< M x H positions
  std::vector<double> logits;
  std::vector<double> probabilities;
};

struct PredictionSet
{
  std::vector<ActorPrediction> actors;
  const ActorPrediction * find(const std::string & actor_id) const;
};

template <typename T>
PredictionSet to_prediction_set(const ForwardOutput<T> & out, const GraphBundle & bundle, const ModelConfig & config);

/// Forward without gradients for every actor in the bundle's predict set.
template <typename T>
PredictionSet predict(const ad::ParamStore<T> & params, const ModelConfig & config, const GraphBundle & bundle);

}  // namespace coop

#endif  // COOP__NETWORK_HPP_

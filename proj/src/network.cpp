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

#include "coop/network.hpp"

#include "coop/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <string>

namespace coop
{
using ad::IndexList;
using ad::Index;
using ad::Matrix;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

namespace
{
std::string lower(const char * s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string relation_prefix(Relation r) { return lower(to_string(r)); }

Relation relation_from_string(const std::string & s)
{
  for (Relation r : {Relation::L2A, Relation::A2L, Relation::L2L, Relation::A2A, Relation::L2P, Relation::P2A,
                     Relation::P2P, Relation::T2L, Relation::T2A}) {
    if (s == to_string(r)) {
      return r;
    }
  }
  throw ConfigError("unknown relation '" + s + "'");
}

std::size_t edge_feature_dim(Relation r) { return (r == Relation::T2L || r == Relation::T2A) ? 4 : 3; }

template <typename T>
Matrix<T> uniform_matrix(const std::string & name, std::uint64_t seed, Index rows, Index cols, double bound)
{
  Rng rng(mix_seed({seed, hash_string(name)}));
  Matrix<T> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(uniform(rng, -bound, bound));
  }
  return m;
}

template <typename T>
class Initializer
{
public:
  Initializer(ParamStore<T> & store, std::uint64_t seed) : store_(store), seed_(seed) {}

  void weight(const std::string & name, Index rows, Index cols, Index fan_in)
  {
    store_.add(name, uniform_matrix<T>(name, seed_, rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in))));
  }
  void weight(const std::string & name, Index rows, Index cols) { weight(name, rows, cols, rows); }
  void zeros(const std::string & name, Index rows, Index cols) { store_.add(name, Matrix<T>::Zero(rows, cols)); }
  void ones(const std::string & name, Index cols) { store_.add(name, Matrix<T>::Ones(1, cols)); }
  void linear(const std::string & prefix, Index in, Index out)
  {
    weight(prefix + ".weight", in, out);
    zeros(prefix + ".bias", 1, out);
  }
  void norm(const std::string & prefix, Index dim)
  {
    ones(prefix + ".gain", dim);
    zeros(prefix + ".bias", 1, dim);
  }

private:
  ParamStore<T> & store_;
  std::uint64_t seed_;
};

template <typename T>
void lane_conv_params(Initializer<T> & init, const std::string & prefix, int dim,
                      const std::vector<ConnectionType> & types)
{
  for (const auto & c : types) {
    init.weight(prefix + "." + c.name() + ".weight", dim, dim);
  }
  init.norm(prefix + ".norm", dim);
}

template <typename T>
void gatv2_params(Initializer<T> & init, const std::string & prefix, int dim, int heads, int edge_features)
{
  const int head_dim = dim / heads;
  init.weight(prefix + ".w_src", dim, dim);
  init.weight(prefix + ".w_dst", dim, dim);
  init.linear(prefix + ".edge_enc", edge_features, head_dim);
  init.weight(prefix + ".edge_proj", head_dim, dim);
  init.weight(prefix + ".attn", 1, dim, head_dim);
  init.zeros(prefix + ".bias", 1, dim);
  init.weight(prefix + ".w_out", dim, dim);
  init.norm(prefix + ".norm", dim);
}

template <typename T>
void encoder_params(Initializer<T> & init, const std::string & prefix, int in, int dim)
{
  init.linear(prefix + ".fc1", in, dim);
  init.linear(prefix + ".fc2", dim, dim);
  init.norm(prefix + ".norm", dim);
}

template <typename T>
Var<T> P(Tape<T> & tape, const ParamStore<T> & params, const std::string & name)
{
  return tape.param(params, name);
}

template <typename T>
Var<T> linear(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, const Var<T> & x)
{
  return ad::add(ad::matmul(x, P(tape, params, prefix + ".weight")), P(tape, params, prefix + ".bias"));
}

template <typename T>
Var<T> norm(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, const Var<T> & x)
{
  return ad::layer_norm(x, P(tape, params, prefix + ".gain"), P(tape, params, prefix + ".bias"));
}

/// relu(LN(relu(x W1 + b1) W2 + b2))
template <typename T>
Var<T> encoder(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, const Var<T> & x)
{
  Var<T> h = ad::relu(linear(tape, params, prefix + ".fc1", x));
  h = linear(tape, params, prefix + ".fc2", h);
  return ad::relu(norm(tape, params, prefix + ".norm", h));
}

template <typename T>
Matrix<T> node_feature_matrix(const GraphNodes & nodes, double input_scale)
{
  const Index cols = nodes.size() == 0 ? 0 : static_cast<Index>(nodes.raw_features.front().size());
  Matrix<T> m(static_cast<Index>(nodes.size()), cols);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto & f = nodes.raw_features[i];
    if (static_cast<Index>(f.size()) != cols) {
      throw ShapeMismatch("node feature rows have differing lengths");
    }
    for (Index c = 0; c < cols; ++c) {
      // [x, y, ...]: coordinates are scaled, direction components are not.
      const double scale = c < 2 ? input_scale : 1.0;
      m(static_cast<Index>(i), c) = static_cast<T>(f[static_cast<std::size_t>(c)] * scale);
    }
  }
  return m;
}

/// Block lower-triangular matrix turning per-step offsets into cumulative displacements.
template <typename T>
const Matrix<T> & cumsum_matrix(int modes, int horizon)
{
  static std::mutex mutex;
  static std::map<std::pair<int, int>, Matrix<T>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(modes, horizon);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const Index n = static_cast<Index>(modes) * horizon * 2;
    Matrix<T> c = Matrix<T>::Zero(n, n);
    for (int m = 0; m < modes; ++m) {
      for (int s = 0; s < horizon; ++s) {
        for (int t = s; t < horizon; ++t) {
          for (int k = 0; k < 2; ++k) {
            c((m * horizon + s) * 2 + k, (m * horizon + t) * 2 + k) = T(1);
          }
        }
      }
    }
    it = cache.emplace(key, std::move(c)).first;
  }
  return it->second;
}

template <typename T>
Var<T> fuse(Tape<T> & tape, const ParamStore<T> & params, const ModelConfig & config, Relation relation,
            Var<T> dst, const Var<T> * src, const GraphBundle & bundle, ForwardTrace<T> * trace)
{
  const CrossEdges & edges = bundle.edges(relation);
  const std::string prefix = relation_prefix(relation);
  for (int s = 0; s < config.fusion_stack; ++s) {
    const Var<T> & source = src == nullptr ? dst : *src;
    Var<T> attention;
    dst = gatv2_layer(tape, params, prefix + "." + std::to_string(s), dst, source, edges, config.heads,
                      static_cast<T>(config.input_scale), trace != nullptr ? &attention : nullptr);
    if (trace != nullptr && attention.valid()) {
      trace->attention[prefix + "." + std::to_string(s)] = attention;
    }
  }
  return dst;
}

template <typename T>
Var<T> lane_conv_stack(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, int depth,
                       Var<T> x, const std::vector<TypedEdges> & edges)
{
  for (int s = 0; s < depth; ++s) {
    x = lane_conv_layer(tape, params, prefix + "." + std::to_string(s), x, edges);
  }
  return x;
}

}  // namespace

ModelConfig ModelConfig::desk()
{
  ModelConfig c;
  c.feature_dim = 32;
  c.mlp_hidden = 256;
  c.heads = 4;
  return c;
}

void ModelConfig::validate() const
{
  auto positive = [](int v, const char * what) {
    if (v < 1) {
      throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
    }
  };
  positive(feature_dim, "feature_dim");
  positive(modes, "modes");
  positive(heads, "heads");
  positive(tcn_layers, "tcn_layers");
  positive(tcn_kernel, "tcn_kernel");
  positive(laneconv_stack, "laneconv_stack");
  positive(fusion_stack, "fusion_stack");
  positive(mlp_hidden, "mlp_hidden");
  positive(history_steps, "history_steps");
  positive(horizon, "horizon");
  positive(trajectory_subsample, "trajectory_subsample");
  if (tcn_kernel % 2 == 0) {
    throw ConfigError("tcn_kernel must be odd");
  }
  if (feature_dim % heads != 0) {
    throw HeadDivisibility(
      "heads (" + std::to_string(heads) + ") must divide feature_dim (" + std::to_string(feature_dim) + ")");
  }
  for (int v : lane_dilations) {
    positive(v, "lane dilation");
  }
  for (int v : path_dilations) {
    positive(v, "path dilation");
  }
  if (!(input_scale > 0.0)) {
    throw ConfigError("input_scale must be positive");
  }
  for (const auto & [r, v] : thresholds) {
    if (!(v > 0.0)) {
      throw ConfigError(std::string("threshold for ") + to_string(r) + " must be positive");
    }
  }
}

GraphConfig ModelConfig::graph_config() const
{
  GraphConfig g;
  g.history_steps = history_steps;
  g.horizon = horizon;
  g.lane_dilations = lane_dilations;
  g.path_dilations = path_dilations;
  g.trajectory_subsample = trajectory_subsample;
  g.thresholds = thresholds;
  return g;
}

nlohmann::json to_json(const ModelConfig & c)
{
  nlohmann::json th = nlohmann::json::object();
  for (const auto & [r, v] : c.thresholds) {
    th[to_string(r)] = v;
  }
  return {{"feature_dim", c.feature_dim},
          {"modes", c.modes},
          {"heads", c.heads},
          {"tcn_layers", c.tcn_layers},
          {"tcn_kernel", c.tcn_kernel},
          {"laneconv_stack", c.laneconv_stack},
          {"fusion_stack", c.fusion_stack},
          {"mlp_hidden", c.mlp_hidden},
          {"history_steps", c.history_steps},
          {"horizon", c.horizon},
          {"trajectory_subsample", c.trajectory_subsample},
          {"lane_dilations", c.lane_dilations},
          {"path_dilations", c.path_dilations},
          {"thresholds", th},
          {"input_scale", c.input_scale}};
}

ModelConfig model_config_from_json(const nlohmann::json & j, const ModelConfig & base)
{
  ModelConfig c = base;
  try {
    auto get = [&](const char * key, auto & field) {
      if (j.contains(key)) {
        j.at(key).get_to(field);
      }
    };
    get("feature_dim", c.feature_dim);
    get("modes", c.modes);
    get("heads", c.heads);
    get("tcn_layers", c.tcn_layers);
    get("tcn_kernel", c.tcn_kernel);
    get("laneconv_stack", c.laneconv_stack);
    get("fusion_stack", c.fusion_stack);
    get("mlp_hidden", c.mlp_hidden);
    get("history_steps", c.history_steps);
    get("horizon", c.horizon);
    get("trajectory_subsample", c.trajectory_subsample);
    get("lane_dilations", c.lane_dilations);
    get("path_dilations", c.path_dilations);
    get("input_scale", c.input_scale);
    if (j.contains("thresholds")) {
      for (const auto & [k, v] : j.at("thresholds").items()) {
        c.thresholds[relation_from_string(k)] = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<ConnectionType> lane_connection_types(const ModelConfig & config)
{
  using Kind = ConnectionType::Kind;
  std::vector<ConnectionType> out{{Kind::Self, 1}};
  for (int n : config.lane_dilations) {
    out.push_back({Kind::Pred, n});
    out.push_back({Kind::Succ, n});
  }
  out.push_back({Kind::Left, 1});
  out.push_back({Kind::Right, 1});
  return out;
}

std::vector<ConnectionType> path_connection_types(const ModelConfig & config)
{
  using Kind = ConnectionType::Kind;
  std::vector<ConnectionType> out{{Kind::Self, 1}};
  for (int n : config.path_dilations) {
    out.push_back({Kind::Pred, n});
    out.push_back({Kind::Succ, n});
  }
  return out;
}

std::vector<ConnectionType> l2l_connection_types(const ModelConfig & config)
{
  auto out = lane_connection_types(config);
  out.push_back({ConnectionType::Kind::Near, 1});
  return out;
}

const std::vector<Relation> & fusion_order()
{
  static const std::vector<Relation> order{Relation::L2P, Relation::P2P, Relation::P2A, Relation::A2L, Relation::L2L,
                                           Relation::T2L, Relation::L2A, Relation::A2A, Relation::T2A};
  return order;
}

template <typename T>
void add_lane_conv_params(ParamStore<T> & store, Rng & rng, const std::string & prefix, int dim,
                          const std::vector<ConnectionType> & types)
{
  Initializer<T> init(store, rng());
  lane_conv_params(init, prefix, dim, types);
}

template <typename T>
void add_gatv2_params(ParamStore<T> & store, Rng & rng, const std::string & prefix, int dim, int heads,
                      int edge_features)
{
  if (heads < 1 || dim % heads != 0) {
    throw HeadDivisibility("heads must divide the feature dimension");
  }
  Initializer<T> init(store, rng());
  gatv2_params(init, prefix, dim, heads, edge_features);
}

template <typename T>
ParamStore<T> init_params(const ModelConfig & config, std::uint64_t seed)
{
  config.validate();
  ParamStore<T> store;
  Initializer<T> init(store, seed);
  const int d = config.feature_dim;
  int in = 3;
  for (int l = 0; l < config.tcn_layers; ++l) {
    init.weight("tcn." + std::to_string(l) + ".weight", config.tcn_kernel * in, d);
    init.zeros("tcn." + std::to_string(l) + ".bias", 1, d);
    in = d;
  }
  encoder_params(init, "lane_enc", 4, d);
  encoder_params(init, "path_enc", 4, d);
  for (int s = 0; s < config.laneconv_stack; ++s) {
    lane_conv_params(init, "mapnet." + std::to_string(s), d, lane_connection_types(config));
  }
  for (Relation r : fusion_order()) {
    if (r == Relation::P2P || r == Relation::L2L) {
      const auto types = r == Relation::P2P ? path_connection_types(config) : l2l_connection_types(config);
      for (int s = 0; s < config.laneconv_stack; ++s) {
        lane_conv_params(init, relation_prefix(r) + "." + std::to_string(s), d, types);
      }
      continue;
    }
    for (int s = 0; s < config.fusion_stack; ++s) {
      gatv2_params(init, relation_prefix(r) + "." + std::to_string(s), d, config.heads,
                   static_cast<int>(edge_feature_dim(r)));
    }
  }
  init.linear("head.fc1", d, config.mlp_hidden);
  init.linear("head.fc2", config.mlp_hidden, config.modes * config.horizon * 2 + config.modes);
  return store;
}

template <typename T>
Var<T> lane_conv_aggregate(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix,
                           const Var<T> & x, const std::vector<TypedEdges> & edges)
{
  const Index n = x.rows();
  std::vector<Var<T>> gathered;
  std::vector<Var<T>> weights;
  for (const auto & e : edges) {
    const std::string name = prefix + "." + e.type.name() + ".weight";
    if (!params.contains(name)) {
      throw MissingWeight("no weight '" + name + "' for connection type " + e.type.name());
    }
    if (e.pairs.empty()) {
      continue;
    }
    weights.push_back(tape.param(params, name));
    if (e.type.kind == ConnectionType::Kind::Self && static_cast<Index>(e.pairs.size()) == n) {
      gathered.push_back(x);
      continue;
    }
    IndexList src;
    IndexList dst;
    src.reserve(e.pairs.size());
    dst.reserve(e.pairs.size());
    for (const auto & [s, d] : e.pairs) {
      src.push_back(s);
      dst.push_back(d);
    }
    gathered.push_back(ad::scatter_sum(ad::index_select(x, src), dst, n));
  }
  if (gathered.empty()) {
    return tape.constant(Matrix<T>::Zero(n, x.cols()));
  }
  if (gathered.size() == 1) {
    return ad::matmul(gathered.front(), weights.front());
  }
  // [A_1 X, ..., A_C X] [W_1; ...; W_C] = sum_c A_c X W_c
  return ad::matmul(ad::concat<T>(gathered, 1), ad::concat<T>(weights, 0));
}

template <typename T>
Var<T> lane_conv_layer(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, const Var<T> & x,
                       const std::vector<TypedEdges> & edges)
{
  Var<T> h = lane_conv_aggregate(tape, params, prefix, x, edges);
  return ad::add(x, ad::relu(norm(tape, params, prefix + ".norm", h)));
}

template <typename T>
Var<T> gatv2_layer(Tape<T> & tape, const ParamStore<T> & params, const std::string & prefix, const Var<T> & dst,
                   const Var<T> & src, const CrossEdges & edges, int heads, T input_scale, Var<T> * attention)
{
  const Index d = dst.cols();
  if (heads < 1 || d % heads != 0) {
    throw HeadDivisibility(
      "heads (" + std::to_string(heads) + ") must divide feature dimension (" + std::to_string(d) + ")");
  }
  if (src.cols() != d) {
    throw ShapeMismatch("gatv2: source and destination feature dimensions differ");
  }
  if (edges.size() == 0 || dst.rows() == 0 || src.rows() == 0) {
    return dst;
  }
  const Index n_dst = dst.rows();
  const Index n_edges = static_cast<Index>(edges.size());
  const Index f = static_cast<Index>(edges.feature_dim());
  const Index head_dim = d / heads;

  Matrix<T> feat(n_edges, f);
  for (Index e = 0; e < n_edges; ++e) {
    const auto & row = edges.features[static_cast<std::size_t>(e)];
    if (static_cast<Index>(row.size()) != f) {
      throw ShapeMismatch("gatv2: edge feature width mismatch");
    }
    for (Index c = 0; c < f; ++c) {
      const T scale = c < 3 ? input_scale : T(1);
      feat(e, c) = static_cast<T>(row[static_cast<std::size_t>(c)]) * scale;
    }
  }
  // Column h of the indicator selects the features of head h.
  Matrix<T> group = Matrix<T>::Zero(d, heads);
  for (Index c = 0; c < d; ++c) {
    group(c, c / head_dim) = T(1);
  }
  IndexList src_idx(edges.src.begin(), edges.src.end());
  IndexList dst_idx(edges.dst.begin(), edges.dst.end());

  Var<T> xs = ad::index_select(ad::matmul(src, P(tape, params, prefix + ".w_src")), src_idx);
  Var<T> xd = ad::index_select(ad::matmul(dst, P(tape, params, prefix + ".w_dst")), dst_idx);
  Var<T> ee = ad::relu(linear(tape, params, prefix + ".edge_enc", tape.constant(std::move(feat))));
  Var<T> xe = ad::matmul(ee, P(tape, params, prefix + ".edge_proj"));
  Var<T> z = ad::leaky_relu(ad::add(ad::add(xs, xd), xe), T(0.2));
  Var<T> g = tape.constant(group);
  Var<T> scores = ad::matmul(ad::mul(z, P(tape, params, prefix + ".attn")), g);
  Var<T> alpha = ad::segment_softmax(scores, dst_idx, n_dst);
  if (attention != nullptr) {
    *attention = alpha;
  }
  Var<T> weights = ad::matmul(alpha, tape.constant(Matrix<T>(group.transpose())));
  Var<T> agg = ad::scatter_sum(ad::mul(xs, weights), dst_idx, n_dst);
  agg = ad::add(agg, P(tape, params, prefix + ".bias"));
  Var<T> update = ad::relu(norm(tape, params, prefix + ".norm", ad::matmul(agg, P(tape, params, prefix + ".w_out"))));

  Matrix<T> mask = Matrix<T>::Zero(n_dst, 1);
  for (int v : dst_idx) {
    mask(v, 0) = T(1);
  }
  return ad::add(dst, ad::mul(update, tape.constant(std::move(mask))));
}

template <typename T>
Var<T> tcn_forward(Tape<T> & tape, const ParamStore<T> & params, const ModelConfig & config,
                   const Var<T> & sequences, int sequence_length)
{
  if (sequences.cols() != 3) {
    throw ShapeMismatch("tcn: sequence rows must be [dx, dy, avail]");
  }
  Var<T> h = sequences;
  for (int l = 0; l < config.tcn_layers; ++l) {
    const std::string p = "tcn." + std::to_string(l);
    h = ad::relu(ad::conv1d(h, P(tape, params, p + ".weight"), P(tape, params, p + ".bias"),
                            static_cast<Index>(sequence_length), static_cast<Index>(config.tcn_kernel)));
  }
  return h;
}

template <typename T>
ForwardOutput<T> forward(Tape<T> & tape, const ParamStore<T> & params, const ModelConfig & config,
                         const GraphBundle & bundle, ForwardTrace<T> * trace)
{
  if (bundle.history_steps != config.history_steps || bundle.horizon != config.horizon) {
    throw ShapeMismatch("graph bundle steps do not match the model config");
  }
  const int seq_len = bundle.sequence_length();
  const Index n_actors = static_cast<Index>(bundle.actors.size());
  if (n_actors == 0 || static_cast<Index>(bundle.sequences.size()) != n_actors * seq_len) {
    throw ShapeMismatch("graph bundle has no actors or inconsistent sequences");
  }
  const T scale = static_cast<T>(config.input_scale);

  Matrix<T> seq(n_actors * seq_len, 3);
  for (Index r = 0; r < seq.rows(); ++r) {
    for (Index c = 0; c < 3; ++c) {
      seq(r, c) = static_cast<T>(bundle.sequences[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    }
  }
  Var<T> temporal = tcn_forward(tape, params, config, tape.constant(std::move(seq)), seq_len);

  const int now = config.history_steps - 1;
  IndexList actor_rows;
  for (Index a = 0; a < n_actors; ++a) {
    actor_rows.push_back(static_cast<int>(a * seq_len + now));
  }
  Var<T> actors = ad::index_select(temporal, actor_rows);

  Var<T> trajectories;
  const bool has_traj = bundle.trajectories.size() > 0;
  if (has_traj) {
    IndexList rows;
    for (std::size_t i = 0; i < bundle.trajectories.size(); ++i) {
      rows.push_back(bundle.trajectories.owner[i] * seq_len + now + bundle.trajectories.time_index[i]);
    }
    trajectories = ad::index_select(temporal, rows);
  }

  const bool has_lanes = bundle.lanes.size() > 0;
  const bool has_paths = bundle.paths.size() > 0;
  Var<T> lanes;
  Var<T> paths;
  if (has_lanes) {
    lanes = encoder(tape, params, "lane_enc", tape.constant(node_feature_matrix<T>(bundle.lanes, scale)));
    lanes = lane_conv_stack(tape, params, "mapnet", config.laneconv_stack, lanes, bundle.lane_edges);
  }
  if (has_paths) {
    paths = encoder(tape, params, "path_enc", tape.constant(node_feature_matrix<T>(bundle.paths, scale)));
  }
  if (has_paths && has_lanes) {
    paths = fuse(tape, params, config, Relation::L2P, paths, &lanes, bundle, trace);
  }
  if (has_paths) {
    paths = lane_conv_stack(tape, params, "p2p", config.laneconv_stack, paths, bundle.path_edges);
    actors = fuse(tape, params, config, Relation::P2A, actors, &paths, bundle, trace);
  }
  if (has_lanes) {
    lanes = fuse(tape, params, config, Relation::A2L, lanes, &actors, bundle, trace);
    std::vector<TypedEdges> l2l_edges = bundle.lane_edges;
    TypedEdges near{{ConnectionType::Kind::Near, 1}, {}};
    const CrossEdges & ll = bundle.edges(Relation::L2L);
    for (std::size_t i = 0; i < ll.size(); ++i) {
      near.pairs.emplace_back(ll.src[i], ll.dst[i]);
    }
    l2l_edges.push_back(std::move(near));
    lanes = lane_conv_stack(tape, params, "l2l", config.laneconv_stack, lanes, l2l_edges);
    if (has_traj) {
      lanes = fuse(tape, params, config, Relation::T2L, lanes, &trajectories, bundle, trace);
    }
    actors = fuse(tape, params, config, Relation::L2A, actors, &lanes, bundle, trace);
  }
  actors = fuse<T>(tape, params, config, Relation::A2A, actors, nullptr, bundle, trace);
  if (has_traj) {
    actors = fuse(tape, params, config, Relation::T2A, actors, &trajectories, bundle, trace);
  }
  if (trace != nullptr) {
    trace->actor_features = actors;
    if (has_lanes) {
      trace->lane_features = lanes;
    }
  }

  ForwardOutput<T> out;
  out.actors = bundle.predict_set;
  const Index n_pred = static_cast<Index>(out.actors.size());
  const Index traj_cols = static_cast<Index>(config.modes) * config.horizon * 2;
  if (n_pred == 0) {
    out.trajectories = tape.constant(Matrix<T>::Zero(0, traj_cols));
    out.logits = tape.constant(Matrix<T>::Zero(0, config.modes));
    return out;
  }
  IndexList pred_rows(out.actors.begin(), out.actors.end());
  Var<T> h = ad::index_select(actors, pred_rows);
  h = ad::relu(linear(tape, params, "head.fc1", h));
  Var<T> raw = linear(tape, params, "head.fc2", h);
  Var<T> offsets = ad::slice(raw, 1, 0, traj_cols);
  out.logits = ad::slice(raw, 1, traj_cols, config.modes);

  Matrix<T> origin(n_pred, traj_cols);
  for (Index i = 0; i < n_pred; ++i) {
    const Vec2 p = bundle.actors.positions[static_cast<std::size_t>(out.actors[static_cast<std::size_t>(i)])];
    for (Index c = 0; c < traj_cols; c += 2) {
      origin(i, c) = static_cast<T>(p.x);
      origin(i, c + 1) = static_cast<T>(p.y);
    }
  }
  out.trajectories = ad::add(ad::matmul(offsets, tape.constant(cumsum_matrix<T>(config.modes, config.horizon))),
                             tape.constant(std::move(origin)));
  return out;
}

const ActorPrediction * PredictionSet::find(const std::string & actor_id) const
{
  for (const auto & a : actors) {
    if (a.actor_id == actor_id) {
      return &a;
    }
  }
  return nullptr;
}

template <typename T>
PredictionSet to_prediction_set(const ForwardOutput<T> & out, const GraphBundle & bundle, const ModelConfig & config)
{
  PredictionSet set;
  const Matrix<T> & traj = out.trajectories.value();
  const Matrix<T> & logits = out.logits.value();
  for (std::size_t i = 0; i < out.actors.size(); ++i) {
    const Index r = static_cast<Index>(i);
    ActorPrediction p;
    p.actor_id = bundle.actor_ids[static_cast<std::size_t>(out.actors[i])];
    p.modes.assign(static_cast<std::size_t>(config.modes), {});
    for (int m = 0; m < config.modes; ++m) {
      for (int t = 0; t < config.horizon; ++t) {
        const Index c = (static_cast<Index>(m) * config.horizon + t) * 2;
        p.modes[static_cast<std::size_t>(m)].push_back(
          {static_cast<double>(traj(r, c)), static_cast<double>(traj(r, c + 1))});
      }
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < config.modes; ++m) {
      p.logits.push_back(static_cast<double>(logits(r, m)));
      max_logit = std::max(max_logit, p.logits.back());
    }
    double total = 0.0;
    for (double l : p.logits) {
      p.probabilities.push_back(std::exp(l - max_logit));
      total += p.probabilities.back();
    }
    for (double & v : p.probabilities) {
      v /= total;
    }
    set.actors.push_back(std::move(p));
  }
  return set;
}

template <typename T>
PredictionSet predict(const ParamStore<T> & params, const ModelConfig & config, const GraphBundle & bundle)
{
  Tape<T> tape;
  tape.set_grad_enabled(false);
  const ForwardOutput<T> out = forward(tape, params, config, bundle);
  return to_prediction_set(out, bundle, config);
}

#define COOP_INSTANTIATE_NETWORK(T)                                                                              \
  template ParamStore<T> init_params<T>(const ModelConfig &, std::uint64_t);                                     \
  template ForwardOutput<T> forward<T>(Tape<T> &, const ParamStore<T> &, const ModelConfig &, const GraphBundle &, \
                                       ForwardTrace<T> *);                                                        \
  template Var<T> lane_conv_layer<T>(Tape<T> &, const ParamStore<T> &, const std::string &, const Var<T> &,     \
                                     const std::vector<TypedEdges> &);                                           \
  template Var<T> lane_conv_aggregate<T>(Tape<T> &, const ParamStore<T> &, const std::string &, const Var<T> &, \
                                         const std::vector<TypedEdges> &);                                       \
  template Var<T> gatv2_layer<T>(Tape<T> &, const ParamStore<T> &, const std::string &, const Var<T> &,         \
                                 const Var<T> &, const CrossEdges &, int, T, Var<T> *);                          \
  template Var<T> tcn_forward<T>(Tape<T> &, const ParamStore<T> &, const ModelConfig &, const Var<T> &, int);   \
  template void add_lane_conv_params<T>(ParamStore<T> &, Rng &, const std::string &, int,                       \
                                        const std::vector<ConnectionType> &);                                    \
  template void add_gatv2_params<T>(ParamStore<T> &, Rng &, const std::string &, int, int, int);                \
  template PredictionSet to_prediction_set<T>(const ForwardOutput<T> &, const GraphBundle &, const ModelConfig &); \
  template PredictionSet predict<T>(const ParamStore<T> &, const ModelConfig &, const GraphBundle &);

COOP_INSTANTIATE_NETWORK(float)
COOP_INSTANTIATE_NETWORK(double)

#undef COOP_INSTANTIATE_NETWORK

}  // namespace coop

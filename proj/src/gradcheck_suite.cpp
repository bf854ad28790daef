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

#include "coop/gradcheck_suite.hpp"

#include "coop/augmentation.hpp"
#include "coop/loss.hpp"
#include "coop/synthetic.hpp"

namespace coop
{
using ad::GradcheckOptions;
using ad::GradcheckReport;
using ad::IndexList;
using ad::Matrix;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

namespace
{
Matrix<double> random_matrix(Rng & rng, ad::Index rows, ad::Index cols, double scale = 1.0)
{
  Matrix<double> m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = scale * normal(rng);
  }
  return m;
}

/// Scalar probe sum(x .* R) with a fixed random R.
Var<double> probe(Tape<double> & tape, const Var<double> & x, std::uint64_t seed)
{
  Rng rng(seed);
  return ad::sum(ad::mul(x, tape.constant(random_matrix(rng, x.rows(), x.cols()))));
}

/// Identity whose backward rule is wrong; used as the negative control.
Var<double> faulty_identity(const Var<double> & x)
{
  Tape<double> & tape = *x.tape();
  const int id = x.id();
  return tape.record(x.value(), tape.requires_grad(id), [id](Tape<double> & t, const Matrix<double> & g) {
    t.grad(id) += 1.5 * g;
  });
}

std::vector<TypedEdges> random_typed_edges(Rng & rng, int n, const std::vector<ConnectionType> & types, double density)
{
  std::vector<TypedEdges> out;
  for (const auto & c : types) {
    TypedEdges e{c, {}};
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if (c.kind == ConnectionType::Kind::Self ? s == d : uniform01(rng) < density) {
          e.pairs.emplace_back(s, d);
        }
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

CrossEdges random_cross_edges(Rng & rng, int n_src, int n_dst, std::size_t features, double density)
{
  CrossEdges e;
  e.relation = features == 4 ? Relation::T2A : Relation::A2A;
  for (int d = 0; d < n_dst; ++d) {
    for (int s = 0; s < n_src; ++s) {
      if (uniform01(rng) < density) {
        e.src.push_back(s);
        e.dst.push_back(d);
        std::vector<double> f;
        for (std::size_t k = 0; k < features; ++k) {
          f.push_back(uniform(rng, -5.0, 5.0));
        }
        e.features.push_back(f);
      }
    }
  }
  return e;
}

AugmentedScene micro_augmented(const ModelConfig & config)
{
  Scene s = normalize_frame(make_micro_scene(config.history_steps, config.horizon));
  CoopAssignment roles;
  roles.roles = {{"ego", CoopRole::PathOnly}, {"lead", CoopRole::FullTrajectory}};
  roles.beta = {{"ego", 1.0}, {"lead", 0.8}};
  return apply_assignment(s, roles);
}
}  // namespace

ModelConfig micro_model_config()
{
  ModelConfig c;
  c.feature_dim = 8;
  c.heads = 2;
  c.modes = 2;
  c.mlp_hidden = 16;
  c.history_steps = 5;
  c.horizon = 6;
  c.laneconv_stack = 2;
  c.fusion_stack = 2;
  c.lane_dilations = {1, 2};
  c.path_dilations = {1, 2};
  return c;
}

std::vector<GradcheckReport> run_gradcheck_suite(const GradcheckSuiteOptions & options)
{
  std::vector<GradcheckReport> reports;
  GradcheckOptions opt;
  opt.tolerance = options.tolerance;
  opt.seed = options.seed;
  Rng rng(options.seed);
  const ModelConfig micro = micro_model_config();
  const int d = micro.feature_dim;

  {
    ParamStore<double> store = init_params<double>(micro, options.seed);
    const int seq = 7;
    const Matrix<double> x = random_matrix(rng, 2 * seq, 3);
    auto fn = [&](Tape<double> & tape, const ParamStore<double> & p) {
      return probe(tape, tcn_forward(tape, p, micro, tape.constant(x), seq), 11);
    };
    opt.param_filter = [](const std::string & n) { return n.rfind("tcn.", 0) == 0; };
    reports.push_back(ad::gradcheck_params("tcn_conv", fn, store, opt));
    opt.param_filter = nullptr;
  }
  {
    ParamStore<double> store;
    std::vector<ConnectionType> types = lane_connection_types(micro);
    types.push_back({ConnectionType::Kind::Near, 1});
    add_lane_conv_params(store, rng, "lc", d, types);
    const auto edges = random_typed_edges(rng, 9, types, 0.15);
    const Matrix<double> x = random_matrix(rng, 9, d);
    const bool fault = options.inject_fault;
    auto fn = [&](Tape<double> & tape, const ParamStore<double> & p) {
      Var<double> out = lane_conv_layer(tape, p, "lc", tape.constant(x), edges);
      return probe(tape, fault ? faulty_identity(out) : out, 12);
    };
    reports.push_back(ad::gradcheck_params("lane_conv", fn, store, opt));
    ad::InputFunction in_fn = [&](Tape<double> & tape, std::span<const Var<double>> in) {
      Var<double> out = lane_conv_layer(tape, store, "lc", in[0], edges);
      return probe(tape, fault ? faulty_identity(out) : out, 12);
    };
    reports.push_back(ad::gradcheck("lane_conv_input", in_fn, {x}, opt));
  }
  {
    ParamStore<double> store;
    add_gatv2_params(store, rng, "gat", d, micro.heads, 4);
    const CrossEdges edges = random_cross_edges(rng, 6, 5, 4, 0.5);
    const Matrix<double> src = random_matrix(rng, 6, d);
    const Matrix<double> dst = random_matrix(rng, 5, d);
    auto fn = [&](Tape<double> & tape, const ParamStore<double> & p) {
      return probe(tape, gatv2_layer(tape, p, "gat", tape.constant(dst), tape.constant(src), edges, micro.heads, 0.1), 13);
    };
    reports.push_back(ad::gradcheck_params("gatv2_fusion", fn, store, opt));
    ad::InputFunction in_fn = [&](Tape<double> & tape, std::span<const Var<double>> in) {
      return probe(tape, gatv2_layer(tape, store, "gat", in[0], in[1], edges, micro.heads, 0.1), 13);
    };
    reports.push_back(ad::gradcheck("gatv2_fusion_input", in_fn, {dst, src}, opt));
  }
  {
    ad::InputFunction fn = [](Tape<double> & tape, std::span<const Var<double>> in) {
      return probe(tape, ad::layer_norm(in[0], in[1], in[2]), 14);
    };
    reports.push_back(ad::gradcheck(
      "layer_norm", fn, {random_matrix(rng, 4, d), random_matrix(rng, 1, d), random_matrix(rng, 1, d)}, opt));
  }
  {
    // TCN + A2A + head on a scene without lanes or cooperative data.
    ModelConfig c = micro;
    ParamStore<double> store = init_params<double>(c, options.seed + 1);
    Scene s = normalize_frame(make_micro_scene(c.history_steps, c.horizon));
    s.lanes.clear();
    CoopAssignment none;
    const AugmentedScene aug = apply_assignment(s, none);
    const GraphBundle bundle = build_graph_bundle(aug, c.graph_config());
    auto fn = [&](Tape<double> & tape, const ParamStore<double> & p) {
      const auto out = forward(tape, p, c, bundle);
      return ad::add(probe(tape, out.trajectories, 15), probe(tape, out.logits, 16));
    };
    opt.param_filter = [](const std::string & n) { return n.rfind("head.", 0) == 0; };
    reports.push_back(ad::gradcheck_params("head_mlp", fn, store, opt));
    opt.param_filter = nullptr;
  }
  {
    const int modes = 3;
    const int horizon = 4;
    Trajectory gt;
    for (int t = 1; t <= horizon; ++t) {
      gt.states.push_back({t, {uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)}, t != 2});
    }
    const Trajectory gt2 = gt;
    ad::InputFunction fn = [&](Tape<double> & tape, std::span<const Var<double>> in) {
      ForwardOutput<double> out;
      out.trajectories = in[0];
      out.logits = in[1];
      out.actors = {0, 1};
      return compute_loss(tape, out, {&gt, &gt2}, modes, horizon).total;
    };
    reports.push_back(ad::gradcheck(
      "losses", fn, {random_matrix(rng, 2, modes * horizon * 2, 1.5), random_matrix(rng, 2, modes)}, opt));
  }
  {
    ParamStore<double> store = init_params<double>(micro, options.seed + 2);
    // Zero biases on zero-feature rows (self loops, padded steps) sit exactly on ReLU kinks.
    for (auto & p : store) {
      if (p.name.ends_with(".bias")) {
        for (ad::Index i = 0; i < p.value.size(); ++i) {
          p.value.data()[i] += uniform(rng, -0.1, 0.1);
        }
      }
    }
    const AugmentedScene aug = micro_augmented(micro);
    const GraphBundle bundle = build_graph_bundle(aug, micro.graph_config());
    const Trajectory & gt = *aug.base.actors[0].future_gt;
    auto fn = [&](Tape<double> & tape, const ParamStore<double> & p) {
      const auto out = forward(tape, p, micro, bundle);
      return compute_loss(tape, out, {&gt}, micro.modes, micro.horizon).total;
    };
    GradcheckOptions e2e = opt;
    e2e.max_entries = 24;
    reports.push_back(ad::gradcheck_params("end_to_end", fn, store, e2e));
  }
  return reports;
}

}  // namespace coop

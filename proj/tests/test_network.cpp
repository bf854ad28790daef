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
#include "coop/loss.hpp"
#include "coop/network.hpp"
#include "coop/synthetic.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

using namespace coop;
using ad::Matrix;
using ad::ParamStore;
using ad::Tape;
using MatD = Matrix<double>;
using oracle::perturb;
using oracle::random_bipartite;
using oracle::random_lanes;
using oracle::random_matrix;

namespace
{
AugmentedScene augmented(const Scene & raw, double theta_gt, double theta_type, std::uint64_t seed)
{
  const Scene s = normalize_frame(raw);
  Rng rng(seed);
  auto a = sample_roles(s, theta_gt, theta_type, true, rng);
  sample_betas(a, rng);
  return apply_assignment(s, a);
}
}  // namespace

TEST_CASE("lane_conv_aggregate equals the dense sum over connection types on 50 random graphs")
{
  ModelConfig config;
  config.lane_dilations = {1, 2, 4, 8, 16, 32};
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lanes = random_lanes(rng, 20);
    if (lanes.empty()) {
      continue;
    }
    const LaneGraph g = build_lane_graph(lanes, config.lane_dilations);
    const int n = static_cast<int>(g.nodes.size());
    const int d = 6;
    ParamStore<double> store;
    add_lane_conv_params(store, rng, "lc", d, lane_connection_types(config));
    perturb(store, rng, 0.1);
    const MatD x = random_matrix(rng, n, d);
    const MatD dense = oracle::lane_conv_dense(store, "lc", x, g.edges);
    Tape<double> tape;
    const auto xv = tape.constant(x);
    const MatD got = lane_conv_aggregate(tape, store, "lc", xv, g.edges).value();
    CHECK((got - dense).cwiseAbs().maxCoeff() <= 1e-6);

    const MatD layer = lane_conv_layer(tape, store, "lc", xv, g.edges).value();
    MatD expected = oracle::layer_norm(dense, store.at("lc.norm.gain").value, store.at("lc.norm.bias").value);
    expected = x + expected.cwiseMax(0.0);
    CHECK((layer - expected).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("lane_conv special cases")
{
  ModelConfig config;
  config.lane_dilations = {1};
  Rng rng(1);
  ParamStore<double> store;
  add_lane_conv_params(store, rng, "lc", 4, lane_connection_types(config));
  const LaneGraph g = build_lane_graph({LaneSegment{"a", {{0, 0}, {2, 0}}, {}, {}, {}, {}}}, config.lane_dilations);
  const MatD x = random_matrix(rng, 1, 4);
  Tape<double> tape;
  SUBCASE("isolated node uses only the self transform")
  {
    const MatD got = lane_conv_aggregate(tape, store, "lc", tape.constant(x), g.edges).value();
    CHECK((got - x * store.at("lc.self.weight").value).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("zero weights give zero pre-activation")
  {
    for (auto & p : store) {
      p.value.setZero();
    }
    const MatD got = lane_conv_aggregate(tape, store, "lc", tape.constant(x), g.edges).value();
    CHECK(got.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("a missing connection weight is reported")
  {
    ParamStore<double> partial;
    partial.add("lc.self.weight", MatD::Identity(4, 4));
    CHECK_THROWS_AS(lane_conv_aggregate(tape, partial, "lc", tape.constant(x), g.edges), MissingWeight);
  }
}

TEST_CASE("gatv2 layer equals a per-edge loop on random bipartite graphs")
{
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const bool timed = trial % 2 == 1;
    const int heads = trial % 3 == 0 ? 1 : (trial % 3 == 1 ? 2 : 4);
    const int d = 8;
    ParamStore<double> store;
    add_gatv2_params(store, rng, "g", d, heads, timed ? 4 : 3);
    perturb(store, rng, 0.1);
    const int n_src = 1 + static_cast<int>(uniform_index(rng, 10));
    const int n_dst = 1 + static_cast<int>(uniform_index(rng, 10));
    const CrossEdges edges = random_bipartite(rng, n_src, n_dst, timed);
    const MatD src = random_matrix(rng, n_src, d);
    const MatD dst = random_matrix(rng, n_dst, d);
    MatD alpha_oracle;
    const MatD expected = oracle::gatv2(store, "g", dst, src, edges, heads, 0.1, &alpha_oracle);
    Tape<double> tape;
    ad::Var<double> alpha;
    const MatD got = gatv2_layer(tape, store, "g", tape.constant(dst), tape.constant(src), edges, heads, 0.1, &alpha).value();
    CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-6);
    if (edges.size() > 0) {
      CHECK((alpha.value() - alpha_oracle).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("gatv2 attention special cases")
{
  Rng rng(2);
  ParamStore<double> store;
  add_gatv2_params(store, rng, "g", 8, 4, 3);
  perturb(store, rng, 0.1);
  const MatD src = random_matrix(rng, 2, 8);
  const MatD dst = random_matrix(rng, 3, 8);
  CrossEdges e;
  e.relation = Relation::L2A;
  e.src = {0, 1, 0};
  e.dst = {0, 1, 1};
  e.features = {{1, 0, 1}, {0, 2, 2}, {3, 4, 5}};
  Tape<double> tape;
  ad::Var<double> alpha;
  const MatD out = gatv2_layer(tape, store, "g", tape.constant(dst), tape.constant(src), e, 4, 0.1, &alpha).value();
  for (int h = 0; h < 4; ++h) {
    CHECK(alpha.value()(0, h) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(alpha.value()(1, h) + alpha.value()(2, h) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Destination 2 has no incoming edge.
  CHECK(out.row(2) == dst.row(2));
  CHECK_THROWS_AS(add_gatv2_params(store, rng, "h", 10, 4, 3), HeadDivisibility);
  CHECK_THROWS_AS(gatv2_layer(tape, store, "g", tape.constant(dst), tape.constant(src), e, 3, 0.1), HeadDivisibility);
}

TEST_CASE("model config validation")
{
  ModelConfig c = ModelConfig::desk();
  CHECK(c.feature_dim == 32);
  CHECK(c.mlp_hidden == 256);
  CHECK(c.heads == 4);
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), HeadDivisibility);
  c = ModelConfig{};
  c.modes = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const ModelConfig d = ModelConfig::desk();
  CHECK(to_json(model_config_from_json(to_json(d))) == to_json(d));
  CHECK(model_config_from_json(nlohmann::json{{"modes", 3}}, d).feature_dim == 32);
}

TEST_CASE("init_params is deterministic per seed and covers every connection type")
{
  const ModelConfig c = micro_model_config();
  const auto a = init_params<float>(c, 5);
  const auto b = init_params<float>(c, 5);
  const auto other = init_params<float>(c, 6);
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].value == b[i].value);
    differs = differs || a[i].value != other[i].value;
    if (a[i].name.ends_with(".bias") && a[i].name.find("norm") == std::string::npos) {
      CHECK(a[i].value.cwiseAbs().maxCoeff() == 0.0f);
    }
  }
  CHECK(differs);
  for (int s = 0; s < c.laneconv_stack; ++s) {
    for (const auto & t : lane_connection_types(c)) {
      CHECK(a.contains("mapnet." + std::to_string(s) + "." + t.name() + ".weight"));
    }
    for (const auto & t : l2l_connection_types(c)) {
      CHECK(a.contains("l2l." + std::to_string(s) + "." + t.name() + ".weight"));
    }
    for (const auto & t : path_connection_types(c)) {
      CHECK(a.contains("p2p." + std::to_string(s) + "." + t.name() + ".weight"));
    }
  }
}

TEST_CASE("tcn on a zero sequence gives the same bias-only response for every actor")
{
  const ModelConfig c = micro_model_config();
  auto store = init_params<double>(c, 3);
  Rng rng(3);
  for (auto & p : store) {
    if (p.name.rfind("tcn.", 0) == 0 && p.name.ends_with(".bias")) {
      p.value = random_matrix(rng, 1, p.value.cols());
    }
  }
  const int len = c.history_steps + c.horizon;
  Tape<double> tape;
  const MatD out = tcn_forward(tape, store, c, tape.constant(MatD::Zero(3 * len, 3)), len).value();
  CHECK(out.rows() == 3 * len);
  CHECK(out.cols() == c.feature_dim);
  const MatD first = out.block(0, 0, len, c.feature_dim);
  CHECK((first - out.block(len, 0, len, c.feature_dim)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((first - out.block(2 * len, 0, len, c.feature_dim)).cwiseAbs().maxCoeff() <= 1e-12);
  // Interior steps see only biases.
  CHECK((out.row(len / 2) - out.row(len / 2 + 1)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward without lanes or cooperative data still predicts every actor")
{
  ModelConfig c = micro_model_config();
  Scene s = make_micro_scene(c.history_steps, c.horizon);
  s.lanes.clear();
  const AugmentedScene aug = apply_assignment(normalize_frame(s), CoopAssignment{});
  const GraphBundle bundle = build_graph_bundle(aug, c.graph_config());
  const auto params = init_params<float>(c, 1);
  const PredictionSet p = predict(params, c, bundle);
  REQUIRE(p.actors.size() == 2);
  for (const auto & a : p.actors) {
    CHECK(a.modes.size() == static_cast<std::size_t>(c.modes));
    CHECK(a.modes[0].size() == static_cast<std::size_t>(c.horizon));
    CHECK(std::accumulate(a.probabilities.begin(), a.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("forward on random init is finite and normalised on 100 generated scenes")
{
  const ModelConfig c = ModelConfig::desk();
  const auto params = init_params<float>(c, 9);
  WorldSpec spec;
  spec.seed = 31;
  for (std::size_t i = 0; i < 100; ++i) {
    const AugmentedScene aug = augmented(generate_scene(spec, i).scene, (i % 5) / 4.0, 0.5, i);
    const GraphBundle bundle = build_graph_bundle(aug, c.graph_config());
    const PredictionSet p = predict(params, c, bundle);
    CHECK(p.actors.size() == aug.predict_set.size());
    for (const auto & a : p.actors) {
      double total = 0.0;
      for (const double q : a.probabilities) {
        CHECK(q >= 0.0);
        total += q;
      }
      CHECK(std::abs(total - 1.0) <= 1e-6);
      for (const auto & mode : a.modes) {
        for (const auto & pt : mode) {
          CHECK(pt.finite());
        }
      }
    }
  }
}

TEST_CASE("attention weights sum to one per destination and head in a full forward pass")
{
  const ModelConfig c = ModelConfig::desk();
  const auto params = init_params<double>(c, 4);
  WorldSpec spec;
  spec.seed = 8;
  for (std::size_t i = 0; i < 10; ++i) {
    const AugmentedScene aug = augmented(generate_scene(spec, i).scene, 1.0, 0.5, i);
    const GraphBundle bundle = build_graph_bundle(aug, c.graph_config());
    Tape<double> tape;
    ForwardTrace<double> trace;
    forward(tape, params, c, bundle, &trace);
    for (const auto & [key, alpha] : trace.attention) {
      const std::string rel = key.substr(0, key.find('.'));
      const CrossEdges * edges = nullptr;
      for (const auto & [r, e] : bundle.cross) {
        std::string name = to_string(r);
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (name == rel) {
          edges = &e;
        }
      }
      REQUIRE(edges != nullptr);
      std::map<int, std::vector<double>> sums;
      for (std::size_t k = 0; k < edges->size(); ++k) {
        auto & row = sums[edges->dst[k]];
        row.resize(static_cast<std::size_t>(c.heads), 0.0);
        for (int h = 0; h < c.heads; ++h) {
          row[static_cast<std::size_t>(h)] += alpha.value()(static_cast<ad::Index>(k), h);
        }
      }
      for (const auto & [dst, row] : sums) {
        for (const double v : row) {
          CHECK(std::abs(v - 1.0) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("permuting actors permutes predictions")
{
  const ModelConfig c = ModelConfig::desk();
  const auto params = init_params<double>(c, 12);
  WorldSpec spec;
  spec.seed = 19;
  for (std::size_t i = 0; i < 10; ++i) {
    const Scene s = normalize_frame(generate_scene(spec, i).scene);
    Scene r = s;
    std::reverse(r.actors.begin(), r.actors.end());
    const auto pa = predict(params, c, build_graph_bundle(apply_assignment(s, CoopAssignment{}), c.graph_config()));
    const auto pb = predict(params, c, build_graph_bundle(apply_assignment(r, CoopAssignment{}), c.graph_config()));
    for (const auto & a : pa.actors) {
      const ActorPrediction * b = pb.find(a.actor_id);
      REQUIRE(b != nullptr);
      for (std::size_t m = 0; m < a.modes.size(); ++m) {
        CHECK(std::abs(a.probabilities[m] - b->probabilities[m]) <= 1e-9);
        for (std::size_t t = 0; t < a.modes[m].size(); ++t) {
          CHECK(distance(a.modes[m][t], b->modes[m][t]) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("a cooperative trajectory influences the prediction of a connected actor")
{
  const ModelConfig c = micro_model_config();
  auto params = init_params<double>(c, 21);
  Rng rng(21);
  perturb(params, rng, 0.05);
  const Scene s = normalize_frame(make_micro_scene(c.history_steps, c.horizon));
  CoopAssignment roles;
  roles.roles = {{"ego", CoopRole::None}, {"lead", CoopRole::FullTrajectory}};
  roles.beta = {{"lead", 1.0}};
  const AugmentedScene aug = apply_assignment(s, roles);
  const GraphBundle bundle = build_graph_bundle(aug, c.graph_config());
  REQUIRE(bundle.edges(Relation::T2A).size() > 0);

  Tape<double> tape;
  const auto out = forward(tape, params, c, bundle);
  const auto loss = compute_loss(tape, out, {&*s.aoi().future_gt}, c.modes, c.horizon);
  tape.backward(loss.total);
  double t2a_grad = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name.rfind("t2a.", 0) == 0 && tape.param_grad(i) != nullptr) {
      t2a_grad += tape.param_grad(i)->cwiseAbs().sum();
    }
  }
  CHECK(t2a_grad > 0.0);

  AugmentedScene changed = aug;
  for (auto & st : changed.coop_trajectories.at("lead").states) {
    st.pos.y += 1.5;
  }
  const auto before = predict(params, c, bundle);
  const auto after = predict(params, c, build_graph_bundle(changed, c.graph_config()));
  CHECK(distance(before.find("ego")->modes[0].back(), after.find("ego")->modes[0].back()) > 1e-6);
}

TEST_CASE("micro end-to-end gradient check")
{
  const auto reports = run_gradcheck_suite({});
  for (const auto & r : reports) {
    INFO(r.name << " " << r.max_rel_error);
    CHECK(r.passed());
    CHECK(r.checked > 0);
  }
  GradcheckSuiteOptions faulty;
  faulty.inject_fault = true;
  bool caught = false;
  for (const auto & r : run_gradcheck_suite(faulty)) {
    caught = caught || !r.passed();
  }
  CHECK(caught);
}

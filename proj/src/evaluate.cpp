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

#include "coop/evaluate.hpp"

#include "coop/errors.hpp"
#include "coop/metrics.hpp"
#include "coop/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace coop
{
namespace
{
struct SceneResult
{
  std::map<int, double> ade;
  std::map<int, double> fde;
};

std::vector<std::size_t> order_by_id(const std::vector<Scene> & scenes)
{
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scenes[a].id < scenes[b].id; });
  return order;
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn && fn)
{
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) {
          fn(i);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto & th : threads) {
    th.join();
  }
  for (auto & e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

MetricsReport aggregate(const std::vector<Scene> & scenes, const std::vector<SceneResult> & results,
                        const std::vector<int> & ks, const EvalConfig & config, const std::string & label)
{
  if (scenes.empty()) {
    throw EmptyInput("evaluation needs at least one scene");
  }
  MetricsReport report;
  for (std::size_t i : order_by_id(scenes)) {
    report.scene_ids.push_back(scenes[i].id);
    for (int k : ks) {
      report.min_ade[k].push_back(results[i].ade.at(k));
      report.min_fde[k].push_back(results[i].fde.at(k));
    }
  }
  for (int k : ks) {
    MetricsRow row;
    row.label = label;
    row.theta_gt = config.theta_gt;
    row.theta_type = config.theta_type;
    row.theta_aoi = config.theta_aoi;
    row.beta = config.beta;
    row.k = k;
    const auto & ade = report.min_ade[k];
    const auto & fde = report.min_fde[k];
    row.min_ade = std::accumulate(ade.begin(), ade.end(), 0.0) / static_cast<double>(ade.size());
    row.min_fde = std::accumulate(fde.begin(), fde.end(), 0.0) / static_cast<double>(fde.size());
    row.miss_rate = miss_rate(fde);
    row.n_scenes = fde.size();
    report.rows.push_back(row);
  }
  return report;
}

SceneResult score(const ActorPrediction & p, const Trajectory & gt, const std::vector<int> & ks)
{
  SceneResult r;
  for (int k : ks) {
    r.ade[k] = min_ade(p, gt, k);
    r.fde[k] = min_fde(p, gt, k);
  }
  return r;
}

const Trajectory & aoi_future(const Scene & s)
{
  const Actor & aoi = s.aoi();
  if (!aoi.future_gt) {
    throw MissingFuture("scene '" + s.id + "': AOI has no ground-truth future");
  }
  return *aoi.future_gt;
}

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string short_fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}
}  // namespace

const MetricsRow & MetricsReport::row(int k) const
{
  for (const auto & r : rows) {
    if (r.k == k) {
      return r;
    }
  }
  throw InvalidK("report has no row for K=" + std::to_string(k));
}

AugmentedScene prepare_eval_scene(const Scene & scene, const EvalConfig & config)
{
  Rng rng(mix_seed({config.seed, hash_string(scene.id)}));
  CoopAssignment roles = sample_roles(scene, config.theta_gt, config.theta_type, true, rng);
  for (auto & [id, b] : roles.beta) {
    b = config.beta;
  }
  if (config.theta_aoi) {
    roles.roles[scene.aoi_id] = CoopRole::PathOnly;
    roles.beta[scene.aoi_id] = config.beta;
  }
  AugmentedScene aug = apply_assignment(scene, roles);
  aug.predict_set = {scene.aoi_id};
  return aug;
}

MetricsReport evaluate_model(const ad::ParamStore<float> & params, const ModelConfig & model,
                             const std::vector<Scene> & scenes, const EvalConfig & config, const std::vector<int> & ks,
                             const std::string & label, int workers)
{
  for (int k : ks) {
    EvalConfig c = config;
    c.k = k;
    c.validate(model.modes);
  }
  const GraphConfig graph = model.graph_config();
  std::vector<SceneResult> results(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const Scene normalized = normalize_frame(scenes[i]);
    const AugmentedScene aug = prepare_eval_scene(normalized, config);
    const GraphBundle bundle = build_graph_bundle(aug, graph);
    const PredictionSet preds = predict(params, model, bundle);
    const ActorPrediction * p = preds.find(normalized.aoi_id);
    if (p == nullptr) {
      throw ReferenceError("no prediction for the AOI of scene '" + normalized.id + "'");
    }
    results[i] = score(*p, aoi_future(normalized), ks);
  });
  return aggregate(scenes, results, ks, config, label);
}

MetricsReport evaluate_constant_velocity(const std::vector<Scene> & scenes, int modes, const std::vector<int> & ks,
                                         const std::string & label)
{
  std::vector<SceneResult> results(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene normalized = normalize_frame(scenes[i]);
    const PredictionSet preds = constant_velocity_baseline(normalized, modes);
    results[i] = score(preds.actors.front(), aoi_future(normalized), ks);
  }
  return aggregate(scenes, results, ks, EvalConfig{}, label);
}

std::string metrics_csv_header()
{
  return "config,theta_gt,theta_type,theta_aoi,beta,K,minADE,minFDE,MR,n_scenes";
}

std::string metrics_csv_row(const MetricsRow & r)
{
  std::ostringstream os;
  os << r.label << "," << fmt(r.theta_gt) << "," << fmt(r.theta_type) << "," << (r.theta_aoi ? 1 : 0) << ","
     << fmt(r.beta) << "," << r.k << "," << fmt(r.min_ade) << "," << fmt(r.min_fde) << "," << fmt(r.miss_rate)
     << "," << r.n_scenes;
  return os.str();
}

SweepAxis parse_sweep_axis(const std::string & name)
{
  if (name == "theta_gt") {
    return SweepAxis::ThetaGt;
  }
  if (name == "beta") {
    return SweepAxis::Beta;
  }
  throw ConfigError("unknown sweep axis '" + name + "' (expected theta_gt or beta)");
}

const char * to_string(SweepAxis axis) { return axis == SweepAxis::ThetaGt ? "theta_gt" : "beta"; }

std::vector<MetricsRow> sweep(const ad::ParamStore<float> & params, const ModelConfig & model,
                              const std::vector<Scene> & scenes, const EvalConfig & base, SweepAxis axis,
                              const std::vector<double> & grid, const std::vector<int> & ks, int workers)
{
  if (grid.empty()) {
    throw EmptyInput("sweep grid is empty");
  }
  std::vector<MetricsRow> rows;
  for (double v : grid) {
    EvalConfig c = base;
    if (axis == SweepAxis::ThetaGt) {
      c.theta_gt = v;
    } else {
      c.beta = v;
    }
    const auto report = evaluate_model(params, model, scenes, c, ks, std::string(to_string(axis)) + "=" + short_fmt(v), workers);
    rows.insert(rows.end(), report.rows.begin(), report.rows.end());
  }
  return rows;
}

std::string sweep_svg(const std::vector<MetricsRow> & all_rows, SweepAxis axis, int k)
{
  std::vector<MetricsRow> rows;
  for (const auto & r : all_rows) {
    if (r.k == k) {
      rows.push_back(r);
    }
  }
  if (rows.empty()) {
    throw InvalidK("no sweep rows for K=" + std::to_string(k));
  }
  auto xval = [&](const MetricsRow & r) { return axis == SweepAxis::ThetaGt ? r.theta_gt : r.beta; };
  double x0 = xval(rows.front());
  double x1 = x0;
  double y1 = 0.0;
  for (const auto & r : rows) {
    x0 = std::min(x0, xval(r));
    x1 = std::max(x1, xval(r));
    y1 = std::max({y1, r.min_fde, r.min_ade});
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  y1 = y1 > 0.0 ? y1 * 1.1 : 1.0;
  const double w = 640;
  const double h = 400;
  const double left = 60;
  const double right = 20;
  const double top = 30;
  const double bottom = 50;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - y / y1 * (h - top - bottom); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << " " << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y1 * i / 4.0;
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(yv) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
       << fmt(yv).substr(0, 4) << "</text>\n";
    const double xv = x0 + (x1 - x0) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << fmt(xv).substr(0, 4) << "</text>\n";
  }
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10 << "\" font-size=\"13\" text-anchor=\"middle\">"
     << (axis == SweepAxis::ThetaGt ? "theta_gt" : "beta") << "</text>\n";
  os << "<text x=\"15\" y=\"" << (top + h - bottom) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 15 " << (top + h - bottom) / 2 << ")\">error [m], K=" << k << "</text>\n";

  auto series = [&](const char * name, const char * color, auto value) {
    os << "<polyline class=\"" << name << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto & r : rows) {
      os << px(xval(r)) << "," << py(value(r)) << " ";
    }
    os << "\"/>\n";
    for (const auto & r : rows) {
      os << "<circle class=\"" << name << "\" cx=\"" << px(xval(r)) << "\" cy=\"" << py(value(r))
         << "\" r=\"3\" fill=\"" << color << "\" data-x=\"" << fmt(xval(r)) << "\" data-y=\"" << fmt(value(r))
         << "\"/>\n";
    }
  };
  series("minFDE", "#c0392b", [](const MetricsRow & r) { return r.min_fde; });
  series("minADE", "#2471a3", [](const MetricsRow & r) { return r.min_ade; });
  os << "<text x=\"" << w - right - 90 << "\" y=\"" << top << "\" font-size=\"12\" fill=\"#c0392b\">minFDE</text>\n";
  os << "<text x=\"" << w - right - 90 << "\" y=\"" << top + 16 << "\" font-size=\"12\" fill=\"#2471a3\">minADE</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace coop

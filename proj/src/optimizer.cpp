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

#include "coop/optimizer.hpp"

#include "coop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace coop
{
template <typename T>
void adam_step(ad::ParamStore<T> & params, const ad::GradientSet<T> & grads, double lr, const AdamConfig & config)
{
  if (grads.size() != params.size()) {
    throw ShapeMismatch("adam_step: gradient count differs from parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto & p = params[i];
    const auto & g = grads[i];
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
      throw ShapeMismatch("adam_step: gradient shape differs for '" + p.name + "'");
    }
    ++p.adam_step;
    const T b1 = static_cast<T>(config.beta1);
    const T b2 = static_cast<T>(config.beta2);
    p.adam_m = b1 * p.adam_m + (T(1) - b1) * g;
    p.adam_v = b2 * p.adam_v + (T(1) - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.adam_step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.adam_step));
    const T step = static_cast<T>(lr / c1);
    const T root_c2 = static_cast<T>(std::sqrt(c2));
    const T eps = static_cast<T>(config.eps);
    p.value.array() -= step * p.adam_m.array() / (p.adam_v.array().sqrt() / root_c2 + eps);
  }
}

template void adam_step<float>(ad::ParamStore<float> &, const ad::GradientSet<float> &, double, const AdamConfig &);
template void adam_step<double>(ad::ParamStore<double> &, const ad::GradientSet<double> &, double,
                                const AdamConfig &);

double onecycle_peak(std::int64_t total, const OneCycleConfig & config)
{
  return std::max(1.0, std::floor(config.warmup_fraction * static_cast<double>(total)));
}

double onecycle_lr(double iteration, std::int64_t total, double max_lr, const OneCycleConfig & config)
{
  if (total < 1) {
    throw ConfigError("onecycle_lr: total iterations must be positive");
  }
  const double initial = max_lr / config.div_factor;
  const double final_lr = max_lr / config.final_div_factor;
  const double peak = onecycle_peak(total, config);
  const double last = static_cast<double>(total - 1);
  const double it = std::clamp(iteration, 0.0, std::max(last, 0.0));
  auto anneal = [](double from, double to, double p) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
  };
  if (it <= peak) {
    return anneal(initial, max_lr, it / peak);
  }
  const double span = std::max(1.0, last - peak);
  return anneal(max_lr, final_lr, std::min(1.0, (it - peak) / span));
}

}  // namespace coop

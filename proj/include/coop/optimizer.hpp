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

#ifndef COOP__OPTIMIZER_HPP_
#define COOP__OPTIMIZER_HPP_

#include "coop/autodiff/tensor.hpp"

#include <cstdint>

namespace coop
{
struct AdamConfig
{
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

/// Bias-corrected Adam; moments and step counts live in each Parameter.
template <typename T>
void adam_step(ad::ParamStore<T> & params, const ad::GradientSet<T> & grads, double lr, const AdamConfig & config = {});

struct OneCycleConfig
{
  double warmup_fraction{0.3};
  double div_factor{25.0};
  double final_div_factor{1e4};
};

/// Cosine 1cycle: max_lr/div_factor -> max_lr over the warmup, then -> max_lr/final_div_factor at total-1.
double onecycle_lr(double iteration, std::int64_t total, double max_lr, const OneCycleConfig & config = {});

/// Iteration at which the schedule peaks.
double onecycle_peak(std::int64_t total, const OneCycleConfig & config = {});

}  // namespace coop

#endif  // COOP__OPTIMIZER_HPP_

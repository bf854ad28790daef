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

#ifndef COOP__GRADCHECK_SUITE_HPP_
#define COOP__GRADCHECK_SUITE_HPP_

#include "coop/autodiff/gradcheck.hpp"
#include "coop/network.hpp"

#include <cstdint>
#include <vector>

namespace coop
{
struct GradcheckSuiteOptions
{
  double tolerance{1e-4};
  std::uint64_t seed{3};
  /// Corrupts the LaneConv backward rule; the suite must then fail.
  bool inject_fault{false};
};

/// Small 64-bit model used by the gradient checks: d=8, 2 heads, 2 modes, T_hist=5, H=6.
ModelConfig micro_model_config();

/// Per-layer and end-to-end gradient checks at 64-bit precision.
std::vector<ad::GradcheckReport> run_gradcheck_suite(const GradcheckSuiteOptions & options = {});

}  // namespace coop

#endif  // COOP__GRADCHECK_SUITE_HPP_

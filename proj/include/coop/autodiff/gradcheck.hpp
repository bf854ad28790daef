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

#ifndef COOP__AUTODIFF__GRADCHECK_HPP_
#define COOP__AUTODIFF__GRADCHECK_HPP_

#include "coop/autodiff/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace coop::ad
{
struct GradcheckOptions
{
  double step{1e-5};
  double tolerance{1e-4};
  /// Relative error is |a - n| / max(|a|, |n|, denom_floor).
  double denom_floor{1e-3};
  /// Entries probed per tensor; 0 probes every entry, otherwise a seeded random subset.
  std::size_t max_entries{0};
  std::uint64_t seed{7};
  /// Restricts gradcheck_params to matching parameter names when set.
  std::function<bool(const std::string &)> param_filter;
};

struct GradcheckReport
{
  std::string name;
  double max_rel_error{0.0};
  std::size_t checked{0};
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

using InputFunction = std::function<Var<double>(Tape<double> &, std::span<const Var<double>>)>;
using ParamFunction = std::function<Var<double>(Tape<double> &, const ParamStore<double> &)>;

/// Compares reverse-mode gradients of a scalar function against central differences.
GradcheckReport gradcheck(std::string name, const InputFunction & fn, std::vector<Matrix<double>> inputs,
                          const GradcheckOptions & options = {});

/// Same comparison with respect to every tensor of a parameter store.
GradcheckReport gradcheck_params(std::string name, const ParamFunction & fn, ParamStore<double> & store,
                                 const GradcheckOptions & options = {});

}  // namespace coop::ad

#endif  // COOP__AUTODIFF__GRADCHECK_HPP_

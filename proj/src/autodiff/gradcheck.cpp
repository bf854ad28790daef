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

#include "coop/autodiff/gradcheck.hpp"

#include "coop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace coop::ad
{
namespace
{
std::vector<Index> probe_entries(Index size, const GradcheckOptions & options, std::uint64_t salt)
{
  std::vector<Index> all(static_cast<std::size_t>(size));
  std::iota(all.begin(), all.end(), Index{0});
  if (options.max_entries == 0 || all.size() <= options.max_entries) {
    return all;
  }
  Rng rng(mix_seed({options.seed, salt}));
  for (std::size_t i = 0; i < options.max_entries; ++i) {
    const std::size_t j = i + uniform_index(rng, all.size() - i);
    std::swap(all[i], all[j]);
  }
  all.resize(options.max_entries);
  std::sort(all.begin(), all.end());
  return all;
}

void compare(GradcheckReport & report, const std::string & tensor, Index entry, double analytic, double numeric,
             const GradcheckOptions & options)
{
  const double denom = std::max({std::abs(analytic), std::abs(numeric), options.denom_floor});
  const double rel = std::abs(analytic - numeric) / denom;
  report.max_rel_error = std::max(report.max_rel_error, std::isfinite(rel) ? rel : 1e300);
  ++report.checked;
  if (!(rel <= options.tolerance)) {
    std::ostringstream os;
    os << tensor << "[" << entry << "]: analytic " << analytic << " numeric " << numeric << " rel " << rel;
    report.failures.push_back(os.str());
  }
}

double evaluate(const InputFunction & fn, const std::vector<Matrix<double>> & inputs)
{
  Tape<double> tape;
  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (const auto & m : inputs) {
    vars.push_back(tape.constant(m));
  }
  return fn(tape, vars).item();
}

double evaluate(const ParamFunction & fn, const ParamStore<double> & store)
{
  Tape<double> tape;
  return fn(tape, store).item();
}
}  // namespace

GradcheckReport gradcheck(std::string name, const InputFunction & fn, std::vector<Matrix<double>> inputs,
                          const GradcheckOptions & options)
{
  GradcheckReport report;
  report.name = std::move(name);
  std::vector<Matrix<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto & m : inputs) {
      vars.push_back(tape.variable(m));
    }
    Var<double> out = fn(tape, vars);
    tape.backward(out);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Matrix<double> & g = vars[i].grad();
      analytic.push_back(g.size() == 0 ? Matrix<double>::Zero(inputs[i].rows(), inputs[i].cols()) : g);
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index e : probe_entries(inputs[i].size(), options, i)) {
      double & x = inputs[i].data()[e];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate(fn, inputs);
      x = saved - options.step;
      const double down = evaluate(fn, inputs);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      compare(report, "input" + std::to_string(i), e, analytic[i].data()[e], numeric, options);
    }
  }
  return report;
}

GradcheckReport gradcheck_params(std::string name, const ParamFunction & fn, ParamStore<double> & store,
                                 const GradcheckOptions & options)
{
  GradcheckReport report;
  report.name = std::move(name);
  GradientSet<double> analytic = zero_gradients(store);
  {
    Tape<double> tape;
    Var<double> out = fn(tape, store);
    tape.backward(out);
    tape.accumulate_param_grads(analytic);
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (options.param_filter && !options.param_filter(store[i].name)) {
      continue;
    }
    Matrix<double> & value = store[i].value;
    for (Index e : probe_entries(value.size(), options, i)) {
      double & x = value.data()[e];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate(fn, store);
      x = saved - options.step;
      const double down = evaluate(fn, store);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      compare(report, store[i].name, e, analytic[i].data()[e], numeric, options);
    }
  }
  return report;
}

}  // namespace coop::ad

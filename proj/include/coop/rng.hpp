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

#ifndef COOP__RNG_HPP_
#define COOP__RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace coop
{
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
double uniform01(Rng & rng);

double uniform(Rng & rng, double lo, double hi);

/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng & rng, std::uint64_t n);

/// Standard normal via Box-Muller on uniform01.
double normal(Rng & rng);

std::uint64_t splitmix64(std::uint64_t x);

/// Order-dependent mix of several 64-bit keys into one seed.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> keys);

std::uint64_t hash_string(std::string_view s);

}  // namespace coop

#endif  // COOP__RNG_HPP_

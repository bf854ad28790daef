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

#ifndef COOP__CHECKPOINT_HPP_
#define COOP__CHECKPOINT_HPP_

#include "coop/autodiff/tensor.hpp"
#include "coop/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>

namespace coop
{
inline constexpr int kCheckpointFormatVersion = 1;

struct TrainConfig
{
  std::int64_t iterations{150000};
  int batch_size{64};
  double max_lr{1e-3};
  double warmup_fraction{0.3};
  double div_factor{25.0};
  double final_div_factor{1e4};
  std::uint64_t seed{0};
  /// Negative values draw the fraction from U[0,1] per item; otherwise it is fixed.
  double theta_gt{-1.0};
  double theta_type{-1.0};
  double beta_min{0.05};
  double beta_max{2.0};
  std::int64_t validate_every{1000};  //!< 0 validates only at the end
  std::int64_t checkpoint_every{1000};
  std::size_t val_scenes{200};  //!< Validation subset size; 0 uses the whole split
  std::int64_t log_every{100};

  /// 20000 iterations, batch 16.
  static TrainConfig desk();
  void validate() const;
};

nlohmann::json to_json(const TrainConfig & config);
/// Fields missing from `j` keep their value from `base`.
TrainConfig train_config_from_json(const nlohmann::json & j, const TrainConfig & base = {});

struct Checkpoint
{
  ModelConfig model;
  TrainConfig train;
  ad::ParamStore<float> params;
  std::int64_t iteration{0};  //!< Completed optimizer steps
  double best_val{std::numeric_limits<double>::infinity()};
};

/// "COOPCKPT\n", u64 manifest length, JSON manifest, little-endian float32 payload
/// (per parameter: value, adam_m, adam_v). Written atomically via a temporary file.
void save_checkpoint(const Checkpoint & checkpoint, const std::string & path);

/// Throws FormatVersionError on a version mismatch and CorruptionError on damaged files.
Checkpoint load_checkpoint(const std::string & path);

}  // namespace coop

#endif  // COOP__CHECKPOINT_HPP_

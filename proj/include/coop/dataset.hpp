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

#ifndef COOP__DATASET_HPP_
#define COOP__DATASET_HPP_

#include "coop/scene.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace coop
{
inline constexpr int kDatasetFormatVersion = 1;

/// manifest.json of a dataset directory; `files` are relative to the directory.
struct DatasetManifest
{
  int version{kDatasetFormatVersion};
  std::vector<std::string> files;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  nlohmann::json generator;  //!< Free-form description of how the scenes were produced.
};

enum class Split { Train, Val, All };

void write_manifest(const std::string & dir, const DatasetManifest & manifest);
DatasetManifest read_manifest(const std::string & dir);

struct LoadedScenes
{
  std::vector<Scene> scenes;
  std::vector<std::string> skipped;  //!< "<file>: <reason>" for malformed scenes
};

/// Loads a split in manifest order. Malformed scenes are skipped with a warning.
LoadedScenes load_split(const std::string & dir, const DatasetManifest & manifest, Split split);

}  // namespace coop

#endif  // COOP__DATASET_HPP_

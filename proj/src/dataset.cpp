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

#include "coop/dataset.hpp"

#include "coop/errors.hpp"

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace coop
{
namespace fs = std::filesystem;

void write_manifest(const std::string & dir, const DatasetManifest & m)
{
  nlohmann::json j{{"version", m.version},
                   {"files", m.files},
                   {"train", m.train},
                   {"val", m.val},
                   {"generator", m.generator}};
  fs::create_directories(dir);
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string & dir)
{
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) {
    throw DataError("dataset manifest not found: " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(ss.str());
    m.version = j.at("version").get<int>();
    if (m.version != kDatasetFormatVersion) {
      throw FormatVersionError(
        "dataset manifest version " + std::to_string(m.version) + ", expected " +
        std::to_string(kDatasetFormatVersion));
    }
    j.at("files").get_to(m.files);
    j.at("train").get_to(m.train);
    j.at("val").get_to(m.val);
    if (j.contains("generator")) {
      m.generator = j.at("generator");
    }
  } catch (const nlohmann::json::exception & e) {
    throw SchemaError("malformed dataset manifest " + path.string() + ": " + e.what());
  }
  for (auto idx : m.train) {
    if (idx >= m.files.size()) {
      throw ReferenceError("manifest train index out of range");
    }
  }
  for (auto idx : m.val) {
    if (idx >= m.files.size()) {
      throw ReferenceError("manifest val index out of range");
    }
  }
  return m;
}

LoadedScenes load_split(const std::string & dir, const DatasetManifest & m, Split split)
{
  std::vector<std::size_t> indices;
  switch (split) {
    case Split::Train:
      indices = m.train;
      break;
    case Split::Val:
      indices = m.val;
      break;
    case Split::All:
      for (std::size_t i = 0; i < m.files.size(); ++i) {
        indices.push_back(i);
      }
      break;
  }
  LoadedScenes out;
  out.scenes.reserve(indices.size());
  for (auto idx : indices) {
    const std::string path = (fs::path(dir) / m.files[idx]).string();
    try {
      out.scenes.push_back(load_scene_file(path));
    } catch (const DataError & e) {
      spdlog::warn("skipping {}: {}", m.files[idx], e.what());
      out.skipped.push_back(m.files[idx] + ": " + e.what());
    }
  }
  return out;
}

}  // namespace coop

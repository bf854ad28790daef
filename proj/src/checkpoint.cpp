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

#include "coop/checkpoint.hpp"

#include "coop/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

namespace coop
{
namespace
{
constexpr char kMagic[] = "COOPCKPT\n";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

void put_u64(std::string & out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

std::uint64_t get_u64(const std::string & in, std::size_t pos)
{
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

void put_floats(std::string & out, const ad::Matrix<float> & m)
{
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(m.data()[i]);
    for (int b = 0; b < 4; ++b) {
      out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
  }
}

void get_floats(const std::string & in, std::size_t pos, ad::Matrix<float> & m)
{
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(4 * i + b)]))
              << (8 * b);
    }
    m.data()[i] = std::bit_cast<float>(bits);
  }
}

std::uint32_t crc(const char * data, std::size_t n)
{
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef *>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

double json_double(double v) { return std::isfinite(v) ? v : -1.0; }
}  // namespace

TrainConfig TrainConfig::desk()
{
  TrainConfig c;
  c.iterations = 20000;
  c.batch_size = 16;
  return c;
}

void TrainConfig::validate() const
{
  if (iterations < 1 || batch_size < 1) {
    throw ConfigError("iterations and batch_size must be positive");
  }
  if (!(max_lr > 0.0) || !(warmup_fraction > 0.0 && warmup_fraction < 1.0) || !(div_factor > 0.0) ||
      !(final_div_factor > 0.0)) {
    throw ConfigError("invalid learning-rate schedule");
  }
  if (theta_gt > 1.0 || theta_type > 1.0) {
    throw ConfigError("fixed theta values must lie in [0,1]");
  }
  if (!(beta_min > 0.0 && beta_max >= beta_min)) {
    throw ConfigError("invalid beta range");
  }
  if (validate_every < 0 || checkpoint_every < 0 || log_every < 0) {
    throw ConfigError("intervals must be non-negative");
  }
}

nlohmann::json to_json(const TrainConfig & c)
{
  return {{"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"max_lr", c.max_lr},
          {"schedule", "1cycle"},
          {"warmup_fraction", c.warmup_fraction},
          {"div_factor", c.div_factor},
          {"final_div_factor", c.final_div_factor},
          {"seed", c.seed},
          {"precision", "float32"},
          {"theta_gt", c.theta_gt},
          {"theta_type", c.theta_type},
          {"beta_min", c.beta_min},
          {"beta_max", c.beta_max},
          {"validate_every", c.validate_every},
          {"checkpoint_every", c.checkpoint_every},
          {"val_scenes", c.val_scenes},
          {"log_every", c.log_every}};
}

TrainConfig train_config_from_json(const nlohmann::json & j, const TrainConfig & base)
{
  TrainConfig c = base;
  try {
    auto get = [&](const char * key, auto & field) {
      if (j.contains(key)) {
        j.at(key).get_to(field);
      }
    };
    get("iterations", c.iterations);
    get("batch_size", c.batch_size);
    get("max_lr", c.max_lr);
    get("warmup_fraction", c.warmup_fraction);
    get("div_factor", c.div_factor);
    get("final_div_factor", c.final_div_factor);
    get("seed", c.seed);
    get("theta_gt", c.theta_gt);
    get("theta_type", c.theta_type);
    get("beta_min", c.beta_min);
    get("beta_max", c.beta_max);
    get("validate_every", c.validate_every);
    get("checkpoint_every", c.checkpoint_every);
    get("val_scenes", c.val_scenes);
    get("log_every", c.log_every);
    if (j.contains("schedule") && j.at("schedule") != "1cycle") {
      throw ConfigError("only the 1cycle schedule is supported");
    }
    if (j.contains("precision") && j.at("precision") != "float32") {
      throw ConfigError("training precision must be float32");
    }
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const Checkpoint & ck, const std::string & path)
{
  std::string payload;
  payload.reserve(ck.params.total_elements() * 12);
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto & p : ck.params) {
    const std::size_t offset = payload.size();
    put_floats(payload, p.value);
    put_floats(payload, p.adam_m);
    put_floats(payload, p.adam_v);
    tensors.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"offset", offset},
                       {"adam_step", p.adam_step},
                       {"crc32", crc(payload.data() + offset, payload.size() - offset)}});
  }
  nlohmann::json manifest{{"format", "coop_predict checkpoint"},
                          {"version", kCheckpointFormatVersion},
                          {"byte_order", "little"},
                          {"dtype", "float32"},
                          {"model_config", to_json(ck.model)},
                          {"train_config", to_json(ck.train)},
                          {"iteration", ck.iteration},
                          {"best_val", json_double(ck.best_val)},
                          {"rng", {{"kind", "counter"}, {"seed", ck.train.seed}, {"iteration", ck.iteration}}},
                          {"payload_bytes", payload.size()},
                          {"payload_crc32", crc(payload.data(), payload.size())},
                          {"tensors", tensors}};
  const std::string text = manifest.dump();
  std::string blob(kMagic, kMagicSize);
  put_u64(blob, text.size());
  blob += text;
  blob += payload;

  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot write checkpoint " + tmp.string());
    }
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) {
      throw DataError("failed writing checkpoint " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

Checkpoint load_checkpoint(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open checkpoint " + path);
  }
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < kMagicSize + 8 || blob.compare(0, kMagicSize, kMagic) != 0) {
    throw CorruptionError(path + " is not a checkpoint (bad header)");
  }
  const std::uint64_t manifest_size = get_u64(blob, kMagicSize);
  const std::size_t payload_start = kMagicSize + 8 + manifest_size;
  if (manifest_size > blob.size() || payload_start > blob.size()) {
    throw CorruptionError(path + ": truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(kMagicSize + 8, manifest_size));
  } catch (const nlohmann::json::exception & e) {
    throw CorruptionError(path + ": unreadable manifest: " + e.what());
  }
  Checkpoint ck;
  try {
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatVersionError(
        path + ": checkpoint version " + std::to_string(version) + ", expected " +
        std::to_string(kCheckpointFormatVersion));
    }
    const std::string payload = blob.substr(payload_start);
    if (payload.size() != manifest.at("payload_bytes").get<std::size_t>()) {
      throw CorruptionError(
        path + ": payload has " + std::to_string(payload.size()) + " bytes, manifest says " +
        manifest.at("payload_bytes").dump());
    }
    if (crc(payload.data(), payload.size()) != manifest.at("payload_crc32").get<std::uint32_t>()) {
      throw CorruptionError(path + ": payload checksum mismatch");
    }
    ck.model = model_config_from_json(manifest.at("model_config"));
    ck.train = train_config_from_json(manifest.at("train_config"));
    ck.iteration = manifest.at("iteration").get<std::int64_t>();
    const double best = manifest.at("best_val").get<double>();
    ck.best_val = best < 0.0 ? std::numeric_limits<double>::infinity() : best;
    for (const auto & t : manifest.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t bytes = static_cast<std::size_t>(rows * cols) * 12;
      if (rows < 0 || cols < 0 || offset + bytes > payload.size()) {
        throw CorruptionError(path + ": tensor '" + t.at("name").get<std::string>() + "' out of bounds");
      }
      if (crc(payload.data() + offset, bytes) != t.at("crc32").get<std::uint32_t>()) {
        throw CorruptionError(path + ": checksum mismatch for '" + t.at("name").get<std::string>() + "'");
      }
      auto & p = ck.params.add(t.at("name").get<std::string>(), ad::Matrix<float>(rows, cols));
      const std::size_t block = static_cast<std::size_t>(rows * cols) * 4;
      get_floats(payload, offset, p.value);
      get_floats(payload, offset + block, p.adam_m);
      get_floats(payload, offset + 2 * block, p.adam_v);
      p.adam_step = t.at("adam_step").get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception & e) {
    throw CorruptionError(path + ": malformed manifest: " + e.what());
  }
  return ck;
}

}  // namespace coop

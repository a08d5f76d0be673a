//
// Copyright 2026 The dualtrace Authors
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
//

#include "dualtrace/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dualtrace/config.hpp"
#include "dualtrace/error.hpp"

namespace dualtrace::engine {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'D', 'T', 'C', 'K', 'P', 'T', '\r', '\n'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

struct Parsed {
  json header;
  std::vector<std::uint8_t> bytes;
  std::size_t payload = 0;
};

Parsed parse(const fs::path& path) {
  require(fs::exists(path), Errc::MissingFile, "no such checkpoint: " + path.string());
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  Parsed p;
  p.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const auto& b = p.bytes;
  require(b.size() >= 16 && std::memcmp(b.data(), kMagic, 8) == 0, Errc::DataError,
          path.string() + ": not a checkpoint");
  const std::uint64_t len = get_u64(b.data() + 8);
  require(len <= b.size() - 16, Errc::DataError, path.string() + ": truncated header");
  try {
    p.header = json::parse(b.begin() + 16, b.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    fail(Errc::DataError, path.string() + ": corrupt header: " + e.what());
  }
  const auto version = p.header.value("schema_version", -1);
  require(version == kCheckpointSchemaVersion, Errc::SchemaVersionMismatch,
          path.string() + ": checkpoint schema " + std::to_string(version) + ", expected " +
              std::to_string(kCheckpointSchemaVersion));
  p.payload = 16 + len;
  return p;
}

CheckpointMeta meta_of(const json& h) {
  CheckpointMeta m;
  m.step = h.at("step").get<std::int64_t>();
  m.epoch = h.at("epoch").get<int>();
  m.seed = h.at("seed").get<std::uint64_t>();
  return m;
}

void copy_tensors(const Parsed& p, const fs::path& path, model::DualBranchModel<float>& model) {
  const auto& index = p.header.at("tensors");
  const auto& entries = model.params().entries();
  require(index.is_array() && index.size() == entries.size(), Errc::DataError,
          path.string() + ": tensor count does not match the model");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& rec = index[i];
    auto& value = entries[i].var->value;
    const auto name = rec.at("name").get<std::string>();
    require(name == entries[i].name, Errc::DataError,
            path.string() + ": expected tensor " + entries[i].name + ", found " + name);
    const auto shape = rec.at("shape").get<std::array<int, 4>>();
    require(Shape{shape[0], shape[1], shape[2], shape[3]} == value.shape(), Errc::DataError,
            path.string() + ": shape mismatch for " + name);
    const auto offset = rec.at("offset").get<std::uint64_t>();
    require(p.payload + offset + 4 * value.size() <= p.bytes.size(), Errc::DataError,
            path.string() + ": truncated payload at " + name);
    const std::uint8_t* src = p.bytes.data() + p.payload + offset;
    float* dst = value.data();
    for (std::size_t k = 0; k < value.size(); ++k) dst[k] = get_f32(src + 4 * k);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const model::DualBranchModel<float>& model,
                                               const CheckpointMeta& meta) {
  json index = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : model.params().entries()) {
    const auto s = e.var->value.shape();
    index.push_back({{"name", e.name},
                     {"shape", {s.n, s.c, s.h, s.w}},
                     {"offset", offset},
                     {"trainable", e.trainable}});
    offset += 4 * e.var->value.size();
  }
  // nlohmann::json objects are key-sorted, so the header text is canonical.
  const json header{{"schema_version", kCheckpointSchemaVersion},
                    {"model", to_json(model.config())},
                    {"step", meta.step},
                    {"epoch", meta.epoch},
                    {"seed", meta.seed},
                    {"tensors", index}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  out.reserve(16 + text.size() + offset);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : model.params().entries())
    for (float v : e.var->value.values()) put_f32(out, v);
  return out;
}

void save_checkpoint(const fs::path& path, const model::DualBranchModel<float>& model,
                     const CheckpointMeta& meta) {
  const auto bytes = serialize_checkpoint(model, meta);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    require(static_cast<bool>(out), Errc::IoError, "error writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  require(!ec, Errc::IoError, "cannot move checkpoint into place: " + ec.message());
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  const auto p = parse(path);
  LoadedCheckpoint out;
  try {
    out.config = model_config_from_json(p.header.at("model"));
    out.meta = meta_of(p.header);
  } catch (const json::exception& e) {
    fail(Errc::DataError, path.string() + ": corrupt header: " + e.what());
  }
  out.model = std::make_unique<model::DualBranchModel<float>>(out.config, out.meta.seed);
  copy_tensors(p, path, *out.model);
  out.model->mark_trained();
  return out;
}

CheckpointMeta load_parameters(const fs::path& path, model::DualBranchModel<float>& model) {
  const auto p = parse(path);
  CheckpointMeta meta;
  try {
    meta = meta_of(p.header);
    copy_tensors(p, path, model);
  } catch (const json::exception& e) {
    fail(Errc::DataError, path.string() + ": corrupt header: " + e.what());
  }
  model.mark_trained();
  return meta;
}

}  // namespace dualtrace::engine

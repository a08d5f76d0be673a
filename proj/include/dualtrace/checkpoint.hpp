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

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "dualtrace/model.hpp"

namespace dualtrace::engine {

inline constexpr int kCheckpointSchemaVersion = 1;

struct CheckpointMeta {
  std::int64_t step = 0;
  int epoch = 0;
  std::uint64_t seed = 0;
};

/// Layout: 8-byte magic, little-endian u64 header length, a JSON header with
/// sorted keys (schema_version, model config, meta, tensor index), then every
/// parameter and buffer as little-endian float32 in registration order.
std::vector<std::uint8_t> serialize_checkpoint(const model::DualBranchModel<float>& model,
                                               const CheckpointMeta& meta);

/// Written to a temporary file and renamed into place. Throws IoError.
void save_checkpoint(const std::filesystem::path& path,
                     const model::DualBranchModel<float>& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  model::ModelConfig config;
  CheckpointMeta meta;
  std::unique_ptr<model::DualBranchModel<float>> model;
};

/// Throws MissingFile, DataError (corrupt archive) or SchemaVersionMismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every tensor of a checkpoint into an existing model with the same
/// structure (fine-tuning). Throws DataError on a name or shape mismatch.
CheckpointMeta load_parameters(const std::filesystem::path& path,
                               model::DualBranchModel<float>& model);

}  // namespace dualtrace::engine

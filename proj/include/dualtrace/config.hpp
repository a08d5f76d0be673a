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
#include <string>

#include "dualtrace/losses.hpp"
#include "dualtrace/model.hpp"
#include "dualtrace/synth.hpp"
#include "json.hpp"

namespace dualtrace::engine {

struct OptimizerConfig {
  std::string kind = "adam";
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class ScheduleUnit { Epoch, Step };

struct ScheduleConfig {
  double factor = 0.8;
  int period = 10;
  ScheduleUnit unit = ScheduleUnit::Epoch;
};

/// Everything a training run needs. Relative manifest and output paths are
/// resolved against the config file's directory by load_run_config.
struct RunConfig {
  model::ModelConfig model;
  losses::LossConfig loss;
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  int batch_size = 4;
  int epochs = 30;
  std::uint64_t seed = 0;
  std::string train_manifest;
  std::string val_manifest;  // optional; enables per-epoch validation
  int input_size = 256;
  int edge_width = 2;
  bool augment = true;  // random flip / quarter-turn per training sample
  std::string output_dir = "run";
  int checkpoint_every = 0;  // epochs between checkpoints; 0 keeps only the final one
  int verify_every = 1;      // steps between constraint verifications
  std::int64_t max_steps = 0;  // 0 = no limit
  std::string finetune_from;   // checkpoint to start from; the schedule restarts
  double eval_threshold = 0.5;

  /// Throws ConfigError (or InvalidHyper from the loss block).
  void validate() const;
};

using nlohmann::json;

json to_json(const model::ModelConfig& c);
json to_json(const losses::LossConfig& c);
json to_json(const synth::SynthConfig& c);
json to_json(const RunConfig& c);

/// Strict readers: unknown keys and mistyped values throw ConfigError.
/// Missing keys keep their defaults.
model::ModelConfig model_config_from_json(const json& j);
losses::LossConfig loss_config_from_json(const json& j);
synth::SynthConfig synth_config_from_json(const json& j);
RunConfig run_config_from_json(const json& j);

RunConfig load_run_config(const std::filesystem::path& path);
synth::SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace dualtrace::engine

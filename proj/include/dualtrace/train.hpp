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
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dualtrace/config.hpp"
#include "dualtrace/data.hpp"
#include "dualtrace/metrics.hpp"
#include "dualtrace/model.hpp"
#include "dualtrace/nn.hpp"

namespace dualtrace::engine {

/// lr0 * factor^floor(index / period); `index` counts epochs or steps from 0
/// according to the schedule unit.
double lr_schedule(double lr0, const ScheduleConfig& schedule, std::int64_t index);

/// Adam without weight decay. Moments are kept per trainable parameter in
/// registration order; bias correction is computed in double precision.
class Adam {
 public:
  explicit Adam(const OptimizerConfig& config) : config_(config) {}

  void step(nn::ParamStore<float>& params, double lr);
  std::int64_t steps() const noexcept { return t_; }

 private:
  OptimizerConfig config_;
  std::int64_t t_ = 0;
  std::vector<Tensor<float>> m_;
  std::vector<Tensor<float>> v_;
};

struct StepRecord {
  std::int64_t step = 0;  // 1-based
  int epoch = 0;          // 0-based
  double lr = 0.0;
  double total = 0.0;
  double bce = 0.0;
  double focal = 0.0;
  double edge = 0.0;
  std::optional<double> constraint_error;  // set on verification steps

  bool operator==(const StepRecord&) const = default;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;  // last step of the epoch
  double mean_loss = 0.0;
  std::optional<double> val_auc;
  std::optional<double> val_f1;
  std::optional<double> val_iou;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainLog&) const = default;
};

std::string to_jsonl(const StepRecord& r);
std::string to_jsonl(const EpochRecord& r);

struct TrainHooks {
  std::function<void(const StepRecord&, const model::DualBranchModel<float>&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Human-readable progress lines; nullptr for silence.
  std::ostream* progress = nullptr;
};

struct TrainResult {
  TrainLog log;
  std::filesystem::path final_checkpoint;
  std::unique_ptr<model::DualBranchModel<float>> model;
};

/// Trains on in-memory datasets. Writes config.json, train_log.jsonl and
/// checkpoints under config.output_dir, guarded by a lockfile. A non-finite
/// loss saves last_good.ckpt (the parameters before the failing step) and
/// throws NumericalDivergence.
TrainResult train(const RunConfig& config, const data::Dataset& train_set,
                  const data::Dataset* val_set = nullptr, const TrainHooks& hooks = {});

/// Loads the train split of train_manifest (and the val split of
/// val_manifest, or of train_manifest when none is given) and trains.
TrainResult train(const RunConfig& config, const TrainHooks& hooks = {});

}  // namespace dualtrace::engine

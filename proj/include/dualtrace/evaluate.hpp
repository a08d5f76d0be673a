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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dualtrace/data.hpp"
#include "dualtrace/metrics.hpp"
#include "dualtrace/model.hpp"

namespace dualtrace::engine {

/// Maps an N x 3 x H x W batch to N x 1 x H x W manipulation probabilities.
using Predictor = std::function<Tensor<float>(const Tensor<float>& images)>;

/// sigmoid(mask logit) of the model in inference mode.
Predictor model_predictor(model::DualBranchModel<float>& model);

struct EvalOptions {
  double threshold = 0.5;
  int bins = metrics::RocAccumulator::kDefaultBins;
  bool exact_auc = false;
  int batch_size = 4;
};

struct EvalResult {
  std::vector<metrics::MetricsReport> per_source;  // sorted by source tag
  metrics::MetricsReport pooled;

  std::string to_json() const;
};

EvalResult evaluate(const Predictor& predictor, const data::Dataset& dataset,
                    const EvalOptions& options = {});

/// Loads the checkpoint and the records of `split` (all records when empty)
/// and evaluates at the given input size. Throws SchemaVersionMismatch,
/// DataError, MissingFile.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& manifest,
                               std::optional<data::Split> split, int input_size,
                               const EvalOptions& options = {});

}  // namespace dualtrace::engine

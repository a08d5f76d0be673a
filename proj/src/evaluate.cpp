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

#include "dualtrace/evaluate.hpp"

#include <cmath>
#include <map>

#include "dualtrace/checkpoint.hpp"
#include "dualtrace/error.hpp"
#include "json.hpp"

namespace dualtrace::engine {

Predictor model_predictor(model::DualBranchModel<float>& model) {
  return [&model](const Tensor<float>& images) {
    Tape<float> tape(false);
    auto out = model.forward(tape, tape.constant(images), false);
    Tensor<float> prob = std::move(out.mask_logit->value);
    for (float& v : prob.values()) v = static_cast<float>(1.0 / (1.0 + std::exp(-double(v))));
    return prob;
  };
}

std::string EvalResult::to_json() const {
  nlohmann::json j;
  j["pooled"] = nlohmann::json::parse(pooled.to_json());
  j["per_source"] = nlohmann::json::array();
  for (const auto& r : per_source) j["per_source"].push_back(nlohmann::json::parse(r.to_json()));
  return j.dump();
}

EvalResult evaluate(const Predictor& predictor, const data::Dataset& dataset,
                    const EvalOptions& options) {
  require(dataset.size() > 0, Errc::DataError, "evaluate: empty dataset");
  require(options.batch_size >= 1, Errc::ConfigError, "evaluate: batch_size must be positive");
  metrics::Evaluator pooled("pooled", options.threshold, options.bins, options.exact_auc);
  std::map<std::string, metrics::Evaluator> by_source;
  const int s = dataset.input_size();
  const std::size_t plane = std::size_t(s) * s;
  for (std::size_t start = 0; start < dataset.size(); start += options.batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(dataset.size(), start + options.batch_size); ++i)
      idx.push_back(i);
    const auto batch = dataset.batch(idx);
    const auto prob = predictor(batch.image);
    require(prob.shape() == batch.mask.shape(), Errc::ShapeMismatch,
            "evaluate: predictor output shape does not match the masks");
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::span<const float> p(prob.data() + k * plane, plane);
      const std::span<const float> g(batch.mask.data() + k * plane, plane);
      pooled.add_image(p, g);
      const auto& src = dataset[idx[k]].source;
      auto it = by_source.find(src);
      if (it == by_source.end())
        it = by_source
                 .emplace(src, metrics::Evaluator(src, options.threshold, options.bins,
                                                  options.exact_auc))
                 .first;
      it->second.add_image(p, g);
    }
  }
  EvalResult out;
  out.pooled = pooled.report();
  for (const auto& [name, ev] : by_source) out.per_source.push_back(ev.report());
  return out;
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& manifest,
                               std::optional<data::Split> split, int input_size,
                               const EvalOptions& options) {
  auto loaded = load_checkpoint(checkpoint);
  const auto m = data::load_manifest(manifest);
  const auto records = split ? m.select(*split) : m.records;
  require(!records.empty(), Errc::DataError, "no records to evaluate in " + manifest.string());
  data::Dataset ds(records, input_size);
  return evaluate(model_predictor(*loaded.model), ds, options);
}

}  // namespace dualtrace::engine

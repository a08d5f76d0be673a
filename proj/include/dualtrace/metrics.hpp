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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualtrace/tensor.hpp"

namespace dualtrace::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

/// A pixel counts as positive when its score is strictly above threshold
/// and as a ground-truth positive when gt >= 0.5.
ConfusionCounts confusion(std::span<const float> scores, std::span<const float> gt,
                          double threshold = 0.5);

/// 2TP / (2TP + FP + FN). Throws NoPositives when neither prediction nor
/// ground truth contains a positive.
double f1_score(const ConfusionCounts& c);
/// TP / (TP + FP + FN). Throws NoPositives as f1_score.
double iou_score(const ConfusionCounts& c);

template <typename T>
double pixel_f1(const Tensor<T>& pred_prob, const Tensor<T>& gt, double threshold = 0.5);
template <typename T>
double iou(const Tensor<T>& pred_prob, const Tensor<T>& gt, double threshold = 0.5);

/// Mann-Whitney AUC with 0.5 credit per tied pair. Throws DegenerateLabels
/// when only one class is present.
double auc_exact(std::span<const float> scores, std::span<const float> labels);

template <typename T>
double pixel_auc(const Tensor<T>& scores, const Tensor<T>& gt);

/// Pooled ROC accumulator. Histogram mode bins scores in [0, 1] into
/// `bins` equal-width cells and treats pairs sharing a cell as ties; exact
/// mode keeps every (score, label) pair. Accumulators of the same mode and
/// bin count merge associatively.
class RocAccumulator {
 public:
  static constexpr int kDefaultBins = 4096;

  explicit RocAccumulator(int bins = kDefaultBins, bool exact = false);

  void add(std::span<const float> scores, std::span<const float> labels);
  void merge(const RocAccumulator& other);

  /// Throws DegenerateLabels when only one class has been seen.
  double auc() const;

  bool exact() const noexcept { return exact_; }
  int bins() const noexcept { return bins_; }
  std::uint64_t positives() const noexcept { return positives_; }
  std::uint64_t negatives() const noexcept { return negatives_; }

 private:
  int bins_;
  bool exact_;
  std::vector<std::uint64_t> pos_;
  std::vector<std::uint64_t> neg_;
  std::vector<std::pair<float, float>> pairs_;
  std::uint64_t positives_ = 0;
  std::uint64_t negatives_ = 0;
};

/// Metrics for one dataset tag. Undefined values (no positives, single-class
/// ground truth) are empty and described in `status`.
struct MetricsReport {
  std::string dataset;
  double threshold = 0.5;
  std::uint64_t images = 0;
  std::uint64_t pixels = 0;
  std::uint64_t positive_pixels = 0;
  ConfusionCounts counts;
  std::optional<double> f1;
  std::optional<double> auc;
  std::optional<double> iou;
  std::optional<double> macro_f1;   // mean over images with a defined F1
  std::optional<double> macro_iou;
  std::string status = "ok";

  std::string to_json() const;
};

/// Streaming per-dataset evaluation over images.
class Evaluator {
 public:
  explicit Evaluator(std::string dataset, double threshold = 0.5,
                     int bins = RocAccumulator::kDefaultBins, bool exact_auc = false);

  void add_image(std::span<const float> prob, std::span<const float> gt);
  void merge(const Evaluator& other);
  MetricsReport report() const;

 private:
  std::string dataset_;
  double threshold_;
  ConfusionCounts counts_;
  RocAccumulator roc_;
  std::uint64_t images_ = 0;
  double macro_f1_sum_ = 0.0;
  double macro_iou_sum_ = 0.0;
  std::uint64_t macro_n_ = 0;
};

}  // namespace dualtrace::metrics

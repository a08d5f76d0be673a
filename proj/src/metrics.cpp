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

#include "dualtrace/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace dualtrace::metrics {

namespace {

void check_spans(std::size_t a, std::size_t b, const char* what) {
  require(a == b, Errc::ShapeMismatch,
          std::string(what) + ": " + std::to_string(a) + " scores vs " + std::to_string(b) +
              " labels");
}

bool is_positive_label(float g) { return g >= 0.5f; }

// Sums positive-before-negative credit over score-sorted pairs.
double auc_sorted(std::vector<std::pair<float, float>>& pairs, std::uint64_t& pos_total,
                  std::uint64_t& neg_total) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double credit = 0.0;
  double neg_below = 0.0;
  pos_total = neg_total = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i;
    double p = 0.0, n = 0.0;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) {
      if (is_positive_label(pairs[j].second))
        p += 1.0;
      else
        n += 1.0;
      ++j;
    }
    credit += p * (neg_below + 0.5 * n);
    neg_below += n;
    pos_total += static_cast<std::uint64_t>(p);
    neg_total += static_cast<std::uint64_t>(n);
    i = j;
  }
  return credit;
}

void require_two_classes(std::uint64_t pos, std::uint64_t neg) {
  require(pos > 0 && neg > 0, Errc::DegenerateLabels,
          "AUC needs both classes; got " + std::to_string(pos) + " positive and " +
              std::to_string(neg) + " negative pixels");
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const float> scores, std::span<const float> gt,
                          double threshold) {
  check_spans(scores.size(), gt.size(), "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = static_cast<double>(scores[i]) > threshold;
    const bool truth = is_positive_label(gt[i]);
    if (pred && truth)
      ++c.tp;
    else if (pred)
      ++c.fp;
    else if (truth)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double f1_score(const ConfusionCounts& c) {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  require(denom > 0, Errc::NoPositives, "F1 undefined: no positives in prediction or ground truth");
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double iou_score(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fp + c.fn;
  require(denom > 0, Errc::NoPositives, "IoU undefined: no positives in prediction or ground truth");
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

template <typename T>
static ConfusionCounts tensor_confusion(const Tensor<T>& pred, const Tensor<T>& gt,
                                        double threshold) {
  require_shape(gt.shape(), pred.shape(), "metric ground truth");
  std::vector<float> p(pred.values().begin(), pred.values().end());
  std::vector<float> g(gt.values().begin(), gt.values().end());
  return confusion(p, g, threshold);
}

template <typename T>
double pixel_f1(const Tensor<T>& pred_prob, const Tensor<T>& gt, double threshold) {
  return f1_score(tensor_confusion(pred_prob, gt, threshold));
}

template <typename T>
double iou(const Tensor<T>& pred_prob, const Tensor<T>& gt, double threshold) {
  return iou_score(tensor_confusion(pred_prob, gt, threshold));
}

double auc_exact(std::span<const float> scores, std::span<const float> labels) {
  check_spans(scores.size(), labels.size(), "auc_exact");
  std::vector<std::pair<float, float>> pairs(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pairs[i] = {scores[i], labels[i]};
  std::uint64_t pos = 0, neg = 0;
  const double credit = auc_sorted(pairs, pos, neg);
  require_two_classes(pos, neg);
  return credit / (static_cast<double>(pos) * static_cast<double>(neg));
}

template <typename T>
double pixel_auc(const Tensor<T>& scores, const Tensor<T>& gt) {
  require_shape(gt.shape(), scores.shape(), "pixel_auc ground truth");
  std::vector<float> s(scores.values().begin(), scores.values().end());
  std::vector<float> g(gt.values().begin(), gt.values().end());
  return auc_exact(s, g);
}

RocAccumulator::RocAccumulator(int bins, bool exact) : bins_(bins), exact_(exact) {
  require(bins >= 1, Errc::ConfigError, "RocAccumulator needs at least one bin");
  if (!exact_) {
    pos_.assign(static_cast<std::size_t>(bins_), 0);
    neg_.assign(static_cast<std::size_t>(bins_), 0);
  }
}

void RocAccumulator::add(std::span<const float> scores, std::span<const float> labels) {
  check_spans(scores.size(), labels.size(), "RocAccumulator::add");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool positive = is_positive_label(labels[i]);
    (positive ? positives_ : negatives_) += 1;
    if (exact_) {
      pairs_.emplace_back(scores[i], labels[i]);
      continue;
    }
    const double s = std::clamp(static_cast<double>(scores[i]), 0.0, 1.0);
    const auto bin = std::min<std::size_t>(static_cast<std::size_t>(bins_ - 1),
                                           static_cast<std::size_t>(s * bins_));
    (positive ? pos_ : neg_)[bin] += 1;
  }
}

void RocAccumulator::merge(const RocAccumulator& other) {
  require(other.exact_ == exact_ && other.bins_ == bins_, Errc::ConfigError,
          "cannot merge ROC accumulators with different modes or bin counts");
  positives_ += other.positives_;
  negatives_ += other.negatives_;
  if (exact_) {
    pairs_.insert(pairs_.end(), other.pairs_.begin(), other.pairs_.end());
    return;
  }
  for (int b = 0; b < bins_; ++b) {
    pos_[b] += other.pos_[b];
    neg_[b] += other.neg_[b];
  }
}

double RocAccumulator::auc() const {
  require_two_classes(positives_, negatives_);
  const double pn = static_cast<double>(positives_) * static_cast<double>(negatives_);
  if (exact_) {
    auto pairs = pairs_;
    std::uint64_t pos = 0, neg = 0;
    return auc_sorted(pairs, pos, neg) / pn;
  }
  double credit = 0.0;
  double neg_below = 0.0;
  for (int b = 0; b < bins_; ++b) {
    const double p = static_cast<double>(pos_[b]);
    const double n = static_cast<double>(neg_[b]);
    credit += p * (neg_below + 0.5 * n);
    neg_below += n;
  }
  return credit / pn;
}

std::string MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["dataset"] = dataset;
  j["threshold"] = threshold;
  j["images"] = images;
  j["pixels"] = pixels;
  j["positive_pixels"] = positive_pixels;
  j["tp"] = counts.tp;
  j["fp"] = counts.fp;
  j["tn"] = counts.tn;
  j["fn"] = counts.fn;
  j["f1"] = opt(f1);
  j["auc"] = opt(auc);
  j["iou"] = opt(iou);
  j["macro_f1"] = opt(macro_f1);
  j["macro_iou"] = opt(macro_iou);
  j["status"] = status;
  return j.dump();
}

Evaluator::Evaluator(std::string dataset, double threshold, int bins, bool exact_auc)
    : dataset_(std::move(dataset)), threshold_(threshold), roc_(bins, exact_auc) {
  require(threshold > 0.0 && threshold < 1.0, Errc::InvalidThreshold,
          "threshold must lie in (0, 1), got " + std::to_string(threshold));
}

void Evaluator::add_image(std::span<const float> prob, std::span<const float> gt) {
  const auto c = confusion(prob, gt, threshold_);
  counts_ += c;
  roc_.add(prob, gt);
  ++images_;
  if (2 * c.tp + c.fp + c.fn > 0) {
    macro_f1_sum_ += f1_score(c);
    macro_iou_sum_ += iou_score(c);
    ++macro_n_;
  }
}

void Evaluator::merge(const Evaluator& other) {
  counts_ += other.counts_;
  roc_.merge(other.roc_);
  images_ += other.images_;
  macro_f1_sum_ += other.macro_f1_sum_;
  macro_iou_sum_ += other.macro_iou_sum_;
  macro_n_ += other.macro_n_;
}

MetricsReport Evaluator::report() const {
  MetricsReport r;
  r.dataset = dataset_;
  r.threshold = threshold_;
  r.images = images_;
  r.counts = counts_;
  r.pixels = counts_.total();
  r.positive_pixels = counts_.tp + counts_.fn;
  std::vector<std::string> notes;
  if (2 * counts_.tp + counts_.fp + counts_.fn > 0) {
    r.f1 = f1_score(counts_);
    r.iou = iou_score(counts_);
  } else {
    notes.push_back("no_positives");
  }
  if (roc_.positives() > 0 && roc_.negatives() > 0)
    r.auc = roc_.auc();
  else
    notes.push_back("degenerate_labels");
  if (macro_n_ > 0) {
    r.macro_f1 = macro_f1_sum_ / static_cast<double>(macro_n_);
    r.macro_iou = macro_iou_sum_ / static_cast<double>(macro_n_);
  }
  if (!notes.empty()) {
    r.status.clear();
    for (const auto& n : notes) r.status += (r.status.empty() ? "" : ",") + n;
  }
  return r;
}

template double pixel_f1(const Tensor<float>&, const Tensor<float>&, double);
template double pixel_f1(const Tensor<double>&, const Tensor<double>&, double);
template double iou(const Tensor<float>&, const Tensor<float>&, double);
template double iou(const Tensor<double>&, const Tensor<double>&, double);
template double pixel_auc(const Tensor<float>&, const Tensor<float>&);
template double pixel_auc(const Tensor<double>&, const Tensor<double>&);

}  // namespace dualtrace::metrics

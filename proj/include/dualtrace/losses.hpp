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

// Segmentation losses. The probability-domain entry points clamp
// predictions to [kProbClamp, 1 - kProbClamp]; the tape versions take
// logits and use softplus forms so they never evaluate log(0).

#include "dualtrace/autograd.hpp"

namespace dualtrace::losses {

inline constexpr double kProbClamp = 1e-7;

struct LossConfig {
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double dice_smooth = 1.0;
  double w_bce = 1.0;
  double w_focal = 1.0;
  double w_edge = 1.0;

  /// Throws InvalidHyper unless alpha in (0, 1), gamma >= 0, smooth > 0 and
  /// the weights are non-negative.
  void validate() const;
};

template <typename T>
double bce_loss(const Tensor<T>& pred_prob, const Tensor<T>& gt);

template <typename T>
double focal_loss(const Tensor<T>& pred_prob, const Tensor<T>& gt, double alpha, double gamma);

template <typename T>
double dice_edge_loss(const Tensor<T>& edge_prob, const Tensor<T>& gt_edge, double smooth);

template <typename T>
Var<T> bce_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt);

template <typename T>
Var<T> focal_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt, double alpha,
                         double gamma);

/// Dice over every pixel of the batch at once.
template <typename T>
Var<T> dice_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt, double smooth);

template <typename T>
struct LossBreakdown {
  Var<T> total;
  double bce = 0.0;    // weighted
  double focal = 0.0;  // weighted
  double edge = 0.0;   // weighted; 0 when the edge loss is disabled
  double total_value = 0.0;
};

template <typename T>
LossBreakdown<T> combined_loss(Tape<T>& tape, const Var<T>& mask_logit, const Var<T>& edge_logit,
                               const Tensor<T>& gt_mask, const Tensor<T>& gt_edge,
                               const LossConfig& config, bool use_edge_loss = true);

}  // namespace dualtrace::losses

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

// Low-level forensic filters: the constrained (prediction-error) convolution
// with its projection rule, the fixed SRM residual bank, and Sobel gradients.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dualtrace/nn.hpp"

namespace dualtrace::filters {

/// Non-centre sums below this magnitude cannot be normalized.
inline constexpr double kProjectionEpsilon = 1e-8;

/// Constrained kernel bank, out x in x K x K. Every K x K slice is one
/// prediction-error filter: centre -1, remaining taps summing to 1.
template <typename T>
struct ConstrainedKernel {
  Tensor<T> weights;

  int out_channels() const noexcept { return weights.shape().n; }
  int in_channels() const noexcept { return weights.shape().c; }
  int ksize() const noexcept { return weights.shape().h; }
};

struct ConstraintReport {
  double max_center_error = 0.0;  // max |w(0,0) + 1|
  double max_sum_error = 0.0;     // max |sum of non-centre taps - 1|

  bool satisfied(double tol = 1e-6) const noexcept {
    return max_center_error <= tol && max_sum_error <= tol;
  }
};

/// Projects one K x K slice in place: zero the centre, divide the rest by
/// their sum, set the centre to -1. Slices that already satisfy the
/// constraint are left untouched. Returns false (slice unchanged) when the
/// non-centre sum is below kProjectionEpsilon in magnitude.
template <typename T>
bool project_slice(std::span<T> slice, int ksize);

/// Projects every slice. Throws DegenerateKernel naming the first collapsed slice.
template <typename T>
ConstrainedKernel<T> project_constrained_kernel(ConstrainedKernel<T> kernel);

template <typename T>
ConstraintReport verify_constraint(const Tensor<T>& weights);

/// Same-padded convolution with every constrained filter.
template <typename T>
Tensor<T> bayar_forward(const Tensor<T>& x, const ConstrainedKernel<T>& kernel);

/// Trainable constrained convolution layer (no bias, same padding).
template <typename T>
class ConstrainedConv {
 public:
  ConstrainedConv() = default;
  ConstrainedConv(nn::ParamStore<T>& store, const std::string& name, int in_channels,
                  int out_channels, int ksize, nn::Initializer& init);

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  /// Re-applies the projection after an optimizer update. Degenerate slices
  /// are redrawn from `reinit` and projected again; returns how many were.
  int project(nn::Initializer& reinit);
  ConstraintReport verify() const;

  const Var<T>& weight() const noexcept { return weight_; }
  ConstrainedKernel<T> kernel() const { return {weight_->value}; }

 private:
  Var<T> weight_;
  int ksize_ = 5;
};

struct SrmFilter {
  std::string name;
  int ksize = 5;
  std::vector<double> taps;  // ksize * ksize integers before division
  double divisor = 1.0;
};

/// Fixed high-pass residual bank. Each filter is replicated across the input
/// channels with weight 1/in_channels, so a grey image yields the plain
/// single-channel residual.
struct SrmBank {
  std::vector<SrmFilter> filters;
  double threshold = 2.0;
  double input_scale = 255.0;
  int in_channels = 3;

  /// First-order horizontal, 3x3 second-order and 5x5 fifth-order predictors.
  static SrmBank standard();

  int out_channels() const noexcept { return static_cast<int>(filters.size()); }

  template <typename T>
  Tensor<T> weights() const;
};

/// Residuals clamped to [-threshold, threshold] after scaling inputs by
/// input_scale. Never modifies the bank.
template <typename T>
Tensor<T> srm_forward(const Tensor<T>& x, const SrmBank& bank);

struct SobelPair {
  std::array<int, 9> gx;
  std::array<int, 9> gy;

  static constexpr SobelPair standard() {
    return {{-1, 0, 1, -2, 0, 2, -1, 0, 1}, {-1, -2, -1, 0, 0, 0, 1, 2, 1}};
  }
};

template <typename T>
struct SobelMaps {
  Tensor<T> gx;
  Tensor<T> gy;
  Tensor<T> magnitude;
};

/// Per-channel same-padded Sobel responses; positive gx where intensity
/// rises left to right, positive gy where it rises top to bottom.
template <typename T>
SobelMaps<T> sobel_gradients(const Tensor<T>& x);

/// Differentiable per-channel Sobel magnitude sqrt(gx^2 + gy^2). The gradient
/// at zero magnitude is taken as zero.
template <typename T>
Var<T> sobel_magnitude(Tape<T>& tape, const Var<T>& x);

}  // namespace dualtrace::filters

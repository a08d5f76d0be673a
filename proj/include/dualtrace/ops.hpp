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

// Differentiable tensor operations over NCHW feature maps. Every op validates
// shapes eagerly (ShapeMismatch) and records its backward on the tape.

#include <vector>

#include "dualtrace/autograd.hpp"

namespace dualtrace::ops {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// Dense 2-D convolution (cross-correlation). weight is Co x Ci x k x k;
/// bias, when non-null, is 1 x Co x 1 x 1.
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              ConvGeometry geom = {});

/// Stride-1 per-channel convolution. weight is C x 1 x k x k.
template <typename T>
Var<T> depthwise_conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                        int pad, int dilation = 1);

/// Normalizes over the channel axis at every (n, h, w); gamma/beta are 1 x C x 1 x 1.
template <typename T>
Var<T> layer_norm_channels(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma,
                           const Var<T>& beta, T eps = T(1e-6));

struct BatchNormState {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel batch normalization over (N, H, W). Training mode normalizes
/// with batch statistics and updates the running buffers in place; inference
/// mode uses the running buffers.
template <typename T>
Var<T> batch_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                  BatchNormState opts = {});

template <typename T>
Var<T> gelu(Tape<T>& tape, const Var<T>& x);
template <typename T>
Var<T> relu(Tape<T>& tape, const Var<T>& x);
template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x);

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b);
/// a (N x C x H x W) + b (N x C x 1 x 1) broadcast over the plane.
template <typename T>
Var<T> add_channel_broadcast(Tape<T>& tape, const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T factor);

template <typename T>
Var<T> concat_channels(Tape<T>& tape, const std::vector<Var<T>>& parts);

/// Bilinear resize with half-pixel centers (align_corners = false).
template <typename T>
Var<T> upsample_bilinear(Tape<T>& tape, const Var<T>& x, int out_h, int out_w);

template <typename T>
Var<T> global_avg_pool(Tape<T>& tape, const Var<T>& x);

/// Scalar sum(x * weights); weights must match x's shape.
template <typename T>
Var<T> weighted_sum(Tape<T>& tape, const Var<T>& x, const Tensor<T>& weights);

/// Tensor-level bilinear resize shared with preprocessing.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w);

}  // namespace dualtrace::ops

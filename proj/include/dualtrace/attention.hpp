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

#include <string>
#include <vector>

#include "dualtrace/nn.hpp"

namespace dualtrace::attention {

struct FeatureEnhanceConfig {
  int reduce_ratio = 4;
  int dilation = 2;

  void validate() const;
};

/// Spatial gate M1 (1x1 reduce, dilated 3x3, 1x1 restore, BN) plus channel
/// gate M2 (GAP, two-layer MLP, BN). Output is F + F * sigmoid(M1 + M2).
template <typename T>
class FeatureEnhance {
 public:
  FeatureEnhance() = default;
  FeatureEnhance(nn::ParamStore<T>& store, const std::string& name, int channels,
                 const FeatureEnhanceConfig& config, nn::Initializer& init);

  Var<T> operator()(Tape<T>& tape, const Var<T>& f, bool training) const;

  /// The gate M in (0, 1), same shape as f.
  Var<T> gate(Tape<T>& tape, const Var<T>& f, bool training) const;

  int channels() const noexcept { return channels_; }
  const nn::BatchNorm2d<T>& spatial_norm() const noexcept { return spatial_bn_; }
  const nn::BatchNorm2d<T>& channel_norm() const noexcept { return channel_bn_; }

 private:
  int channels_ = 0;
  nn::Conv2d<T> reduce_;
  nn::Conv2d<T> dilated_;
  nn::Conv2d<T> restore_;
  nn::BatchNorm2d<T> spatial_bn_;
  nn::Conv2d<T> fc1_;
  nn::Conv2d<T> fc2_;
  nn::BatchNorm2d<T> channel_bn_;
};

template <typename T>
struct EdgeOutput {
  Var<T> edge_logit;  // N x 1 x H x W
  Var<T> attention;   // residual attention m = M(r) + r on the reduced features
};

/// Edge extraction block. r = 1x1 reduce to C/4; m = M(r) + r with
/// M = ReLU, BN, 3x3, ReLU, BN, 3x3, 1x1; logit = 1x1(r * m).
template <typename T>
class EdgeExtract {
 public:
  EdgeExtract() = default;
  /// Throws BadChannels when in_channels is not a multiple of 4.
  EdgeExtract(nn::ParamStore<T>& store, const std::string& name, int in_channels,
              nn::Initializer& init);

  EdgeOutput<T> operator()(Tape<T>& tape, const Var<T>& f, bool training) const;

  int in_channels() const noexcept { return in_channels_; }

 private:
  int in_channels_ = 0;
  nn::Conv2d<T> reduce_;
  nn::BatchNorm2d<T> bn1_;
  nn::Conv2d<T> conv1_;
  nn::BatchNorm2d<T> bn2_;
  nn::Conv2d<T> conv2_;
  nn::Conv2d<T> mix_;
  nn::Conv2d<T> head_;
};

/// Upsamples each single-channel stage logit to the output size,
/// concatenates them and merges with a learned 1x1 convolution.
template <typename T>
class EdgeFusion {
 public:
  EdgeFusion() = default;
  EdgeFusion(nn::ParamStore<T>& store, const std::string& name, int levels, nn::Initializer& init);

  /// Throws EmptyInput on an empty list, ShapeMismatch on a level count or
  /// batch disagreement.
  Var<T> operator()(Tape<T>& tape, const std::vector<Var<T>>& edge_logits, int out_h,
                    int out_w) const;

  const nn::Conv2d<T>& merge() const noexcept { return merge_; }

 private:
  int levels_ = 0;
  nn::Conv2d<T> merge_;
};

}  // namespace dualtrace::attention

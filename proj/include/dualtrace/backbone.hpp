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

#include <array>
#include <string>
#include <vector>

#include "dualtrace/nn.hpp"

namespace dualtrace::backbone {

struct BackboneConfig {
  std::array<int, 4> stage_dims{32, 64, 128, 256};
  std::array<int, 4> stage_depths{1, 1, 2, 1};
  int dw_kernel = 7;
  int expansion_ratio = 4;
  int stem_stride = 4;
  int in_channels = 3;

  /// Throws ConfigError on non-increasing dims, even dw_kernel, or non-positive sizes.
  void validate() const;

  /// Input side lengths must be multiples of this (stem stride times 2^3).
  int input_multiple() const noexcept { return stem_stride * 8; }
};

/// Stage outputs at strides stem, 2*stem, 4*stem and 8*stem.
template <typename T>
struct FeaturePyramid {
  std::array<Var<T>, 4> levels;
};

/// depthwise k x k -> channel LayerNorm -> 1x1 expand -> GELU -> 1x1 project -> + x
template <typename T>
class ConvNextBlock {
 public:
  ConvNextBlock() = default;
  ConvNextBlock(nn::ParamStore<T>& store, const std::string& name, int channels, int dw_kernel,
                int expansion_ratio, nn::Initializer& init);

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  const nn::DepthwiseConv2d<T>& depthwise() const noexcept { return dw_; }
  const nn::LayerNorm2d<T>& norm() const noexcept { return norm_; }
  const nn::Conv2d<T>& expand() const noexcept { return expand_; }
  const nn::Conv2d<T>& project() const noexcept { return project_; }

 private:
  int channels_ = 0;
  nn::DepthwiseConv2d<T> dw_;
  nn::LayerNorm2d<T> norm_;
  nn::Conv2d<T> expand_;
  nn::Conv2d<T> project_;
};

template <typename T>
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParamStore<T>& store, const std::string& name, const BackboneConfig& config,
           nn::Initializer& init);

  /// Throws BadGeometry when H or W is not a multiple of input_multiple(),
  /// ShapeMismatch when the channel count differs from in_channels.
  FeaturePyramid<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  const BackboneConfig& config() const noexcept { return config_; }

 private:
  BackboneConfig config_;
  nn::Conv2d<T> stem_;
  nn::LayerNorm2d<T> stem_norm_;
  std::array<nn::LayerNorm2d<T>, 3> down_norm_;
  std::array<nn::Conv2d<T>, 3> down_;
  std::array<std::vector<ConvNextBlock<T>>, 4> stages_;
};

}  // namespace dualtrace::backbone

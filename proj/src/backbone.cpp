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

#include "dualtrace/backbone.hpp"

namespace dualtrace::backbone {

void BackboneConfig::validate() const {
  for (int i = 0; i < 4; ++i) {
    require(stage_dims[i] > 0, Errc::ConfigError, "stage_dims must be positive");
    require(stage_depths[i] >= 0, Errc::ConfigError, "stage_depths must be non-negative");
    if (i > 0)
      require(stage_dims[i] > stage_dims[i - 1], Errc::ConfigError,
              "stage_dims must be strictly increasing");
  }
  require(dw_kernel > 0 && dw_kernel % 2 == 1, Errc::ConfigError, "dw_kernel must be odd");
  require(expansion_ratio >= 1, Errc::ConfigError, "expansion_ratio must be >= 1");
  require(stem_stride >= 1, Errc::ConfigError, "stem_stride must be >= 1");
  require(in_channels >= 1, Errc::ConfigError, "in_channels must be >= 1");
}

template <typename T>
ConvNextBlock<T>::ConvNextBlock(nn::ParamStore<T>& store, const std::string& name, int channels,
                                int dw_kernel, int expansion_ratio, nn::Initializer& init)
    : channels_(channels),
      dw_(store, name + ".dw", channels, dw_kernel, init),
      norm_(store, name + ".norm", channels),
      expand_(store, name + ".expand", channels, channels * expansion_ratio, 1, {}, true, init),
      project_(store, name + ".project", channels * expansion_ratio, channels, 1, {}, true, init) {}

template <typename T>
Var<T> ConvNextBlock<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  require(x->value.shape().c == channels_, Errc::ShapeMismatch,
          "convnext block expects " + std::to_string(channels_) + " channels, got " +
              x->value.shape().str());
  auto h = dw_(tape, x);
  h = norm_(tape, h);
  h = expand_(tape, h);
  h = ops::gelu(tape, h);
  h = project_(tape, h);
  return ops::add(tape, x, h);
}

template <typename T>
Backbone<T>::Backbone(nn::ParamStore<T>& store, const std::string& name,
                      const BackboneConfig& config, nn::Initializer& init)
    : config_(config) {
  config_.validate();
  const auto& dims = config_.stage_dims;
  stem_ = nn::Conv2d<T>(store, name + ".stem", config_.in_channels, dims[0], config_.stem_stride,
                        ops::ConvGeometry{config_.stem_stride, 0, 1}, true, init);
  stem_norm_ = nn::LayerNorm2d<T>(store, name + ".stem_norm", dims[0]);
  for (int s = 0; s < 4; ++s) {
    const std::string stage = name + ".stage" + std::to_string(s + 1);
    if (s > 0) {
      down_norm_[s - 1] = nn::LayerNorm2d<T>(store, stage + ".down_norm", dims[s - 1]);
      down_[s - 1] = nn::Conv2d<T>(store, stage + ".down", dims[s - 1], dims[s], 2,
                                   ops::ConvGeometry{2, 0, 1}, true, init);
    }
    for (int b = 0; b < config_.stage_depths[s]; ++b)
      stages_[s].emplace_back(store, stage + ".block" + std::to_string(b), dims[s],
                              config_.dw_kernel, config_.expansion_ratio, init);
  }
}

template <typename T>
FeaturePyramid<T> Backbone<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  const Shape s = x->value.shape();
  const int multiple = config_.input_multiple();
  require(s.h % multiple == 0 && s.w % multiple == 0 && s.h > 0 && s.w > 0, Errc::BadGeometry,
          "input " + s.str() + " is not divisible by " + std::to_string(multiple));
  require(s.c == config_.in_channels, Errc::ShapeMismatch,
          "backbone expects " + std::to_string(config_.in_channels) + " channels, got " + s.str());

  FeaturePyramid<T> pyramid;
  auto h = stem_norm_(tape, stem_(tape, x));
  for (int st = 0; st < 4; ++st) {
    if (st > 0) h = down_[st - 1](tape, down_norm_[st - 1](tape, h));
    for (const auto& block : stages_[st]) h = block(tape, h);
    pyramid.levels[st] = h;
  }
  return pyramid;
}

template class ConvNextBlock<float>;
template class ConvNextBlock<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace dualtrace::backbone

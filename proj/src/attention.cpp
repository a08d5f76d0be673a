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

#include "dualtrace/attention.hpp"

namespace dualtrace::attention {

void FeatureEnhanceConfig::validate() const {
  require(reduce_ratio >= 1, Errc::ConfigError, "reduce_ratio must be >= 1");
  require(dilation >= 1, Errc::ConfigError, "dilation must be >= 1");
}

template <typename T>
FeatureEnhance<T>::FeatureEnhance(nn::ParamStore<T>& store, const std::string& name, int channels,
                                  const FeatureEnhanceConfig& config, nn::Initializer& init)
    : channels_(channels) {
  config.validate();
  require(channels % config.reduce_ratio == 0, Errc::ConfigError,
          name + ": reduce_ratio " + std::to_string(config.reduce_ratio) +
              " does not divide " + std::to_string(channels));
  const int hidden = channels / config.reduce_ratio;
  reduce_ = nn::Conv2d<T>(store, name + ".spatial.reduce", channels, hidden, 1, {}, true, init);
  dilated_ = nn::Conv2d<T>(store, name + ".spatial.dilated", hidden, hidden, 3,
                           ops::ConvGeometry{1, config.dilation, config.dilation}, true, init);
  restore_ = nn::Conv2d<T>(store, name + ".spatial.restore", hidden, channels, 1, {}, true, init);
  spatial_bn_ = nn::BatchNorm2d<T>(store, name + ".spatial.bn", channels);
  fc1_ = nn::Conv2d<T>(store, name + ".channel.fc1", channels, hidden, 1, {}, true, init);
  fc2_ = nn::Conv2d<T>(store, name + ".channel.fc2", hidden, channels, 1, {}, true, init);
  channel_bn_ = nn::BatchNorm2d<T>(store, name + ".channel.bn", channels);
}

template <typename T>
Var<T> FeatureEnhance<T>::gate(Tape<T>& tape, const Var<T>& f, bool training) const {
  require(f->value.shape().c == channels_, Errc::ShapeMismatch,
          "feature enhance expects " + std::to_string(channels_) + " channels, got " +
              f->value.shape().str());
  auto m1 = restore_(tape, dilated_(tape, reduce_(tape, f)));
  m1 = spatial_bn_(tape, m1, training);
  auto m2 = ops::global_avg_pool(tape, f);
  m2 = fc2_(tape, ops::relu(tape, fc1_(tape, m2)));
  m2 = channel_bn_(tape, m2, training);
  return ops::sigmoid(tape, ops::add_channel_broadcast(tape, m1, m2));
}

template <typename T>
Var<T> FeatureEnhance<T>::operator()(Tape<T>& tape, const Var<T>& f, bool training) const {
  auto m = gate(tape, f, training);
  return ops::add(tape, f, ops::mul(tape, f, m));
}

template <typename T>
EdgeExtract<T>::EdgeExtract(nn::ParamStore<T>& store, const std::string& name, int in_channels,
                            nn::Initializer& init)
    : in_channels_(in_channels) {
  require(in_channels > 0 && in_channels % 4 == 0, Errc::BadChannels,
          name + ": channel count " + std::to_string(in_channels) + " is not divisible by 4");
  const int r = in_channels / 4;
  const ops::ConvGeometry same3{1, 1, 1};
  reduce_ = nn::Conv2d<T>(store, name + ".reduce", in_channels, r, 1, {}, true, init);
  bn1_ = nn::BatchNorm2d<T>(store, name + ".bn1", r);
  conv1_ = nn::Conv2d<T>(store, name + ".conv1", r, r, 3, same3, true, init);
  bn2_ = nn::BatchNorm2d<T>(store, name + ".bn2", r);
  conv2_ = nn::Conv2d<T>(store, name + ".conv2", r, r, 3, same3, true, init);
  mix_ = nn::Conv2d<T>(store, name + ".mix", r, r, 1, {}, true, init);
  head_ = nn::Conv2d<T>(store, name + ".head", r, 1, 1, {}, true, init);
}

template <typename T>
EdgeOutput<T> EdgeExtract<T>::operator()(Tape<T>& tape, const Var<T>& f, bool training) const {
  require(f->value.shape().c == in_channels_, Errc::ShapeMismatch,
          "edge block expects " + std::to_string(in_channels_) + " channels, got " +
              f->value.shape().str());
  auto r = reduce_(tape, f);
  auto h = conv1_(tape, bn1_(tape, ops::relu(tape, r), training));
  h = conv2_(tape, bn2_(tape, ops::relu(tape, h), training));
  h = mix_(tape, h);
  auto m = ops::add(tape, h, r);
  auto logit = head_(tape, ops::mul(tape, r, m));
  return {logit, m};
}

template <typename T>
EdgeFusion<T>::EdgeFusion(nn::ParamStore<T>& store, const std::string& name, int levels,
                          nn::Initializer& init)
    : levels_(levels) {
  require(levels >= 1, Errc::ConfigError, name + ": at least one edge level required");
  merge_ = nn::Conv2d<T>(store, name + ".merge", levels, 1, 1, {}, true, init);
}

template <typename T>
Var<T> EdgeFusion<T>::operator()(Tape<T>& tape, const std::vector<Var<T>>& edge_logits, int out_h,
                                 int out_w) const {
  require(!edge_logits.empty(), Errc::EmptyInput, "no edge logits to fuse");
  require(static_cast<int>(edge_logits.size()) == levels_, Errc::ShapeMismatch,
          "edge fusion expects " + std::to_string(levels_) + " levels, got " +
              std::to_string(edge_logits.size()));
  const int n = edge_logits.front()->value.shape().n;
  std::vector<Var<T>> up;
  up.reserve(edge_logits.size());
  for (const auto& e : edge_logits) {
    const Shape s = e->value.shape();
    require(s.c == 1 && s.n == n, Errc::ShapeMismatch,
            "edge level must be N x 1 x H x W with a shared batch, got " + s.str());
    up.push_back(s.h == out_h && s.w == out_w ? e : ops::upsample_bilinear(tape, e, out_h, out_w));
  }
  auto stacked = up.size() == 1 ? up.front() : ops::concat_channels(tape, up);
  return merge_(tape, stacked);
}

template class FeatureEnhance<float>;
template class FeatureEnhance<double>;
template class EdgeExtract<float>;
template class EdgeExtract<double>;
template class EdgeFusion<float>;
template class EdgeFusion<double>;

}  // namespace dualtrace::attention

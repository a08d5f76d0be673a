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

#include "dualtrace/nn.hpp"

#include <cmath>

namespace dualtrace::nn {

template <typename T>
Var<T> ParamStore<T>::add(const std::string& name, Tensor<T> init, bool trainable) {
  require(find(name) == nullptr, Errc::ConfigError, "duplicate parameter name '" + name + "'");
  auto var = make_leaf(std::move(init), trainable);
  entries_.push_back(Entry{name, var, trainable});
  return var;
}

template <typename T>
Var<T> ParamStore<T>::add_parameter(const std::string& name, Tensor<T> init) {
  return add(name, std::move(init), true);
}

template <typename T>
Var<T> ParamStore<T>::add_buffer(const std::string& name, Tensor<T> init) {
  return add(name, std::move(init), false);
}

template <typename T>
Var<T> ParamStore<T>::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  return nullptr;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_)
    if (!e.var->grad.empty()) e.var->grad.fill(T(0));
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t count = 0;
  for (const auto& e : entries_)
    if (e.trainable) count += e.var->value.size();
  return count;
}

template <typename T>
Tensor<T> Initializer::uniform(Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng_));
  return t;
}

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& store, const std::string& name, int in_channels,
                  int out_channels, int ksize, ops::ConvGeometry geom, bool with_bias,
                  Initializer& init)
    : geom_(geom) {
  require(in_channels > 0 && out_channels > 0 && ksize > 0, Errc::ConfigError,
          name + ": non-positive convolution extent");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * ksize * ksize);
  weight_ = store.add_parameter(name + ".weight",
                                init.uniform<T>(Shape{out_channels, in_channels, ksize, ksize}, bound));
  if (with_bias)
    bias_ = store.add_parameter(name + ".bias", init.uniform<T>(Shape{1, out_channels, 1, 1}, bound));
}

template <typename T>
Var<T> Conv2d<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::conv2d(tape, x, weight_, bias_, geom_);
}

template <typename T>
DepthwiseConv2d<T>::DepthwiseConv2d(ParamStore<T>& store, const std::string& name, int channels,
                                    int ksize, Initializer& init)
    : pad_(ksize / 2) {
  require(ksize % 2 == 1, Errc::ConfigError, name + ": depthwise kernel must be odd");
  const double bound = 1.0 / ksize;
  weight_ = store.add_parameter(name + ".weight", init.uniform<T>(Shape{channels, 1, ksize, ksize}, bound));
  bias_ = store.add_parameter(name + ".bias", init.uniform<T>(Shape{1, channels, 1, 1}, bound));
}

template <typename T>
Var<T> DepthwiseConv2d<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::depthwise_conv2d(tape, x, weight_, bias_, pad_);
}

template <typename T>
LayerNorm2d<T>::LayerNorm2d(ParamStore<T>& store, const std::string& name, int channels) {
  gamma_ = store.add_parameter(name + ".gamma", Tensor<T>(Shape{1, channels, 1, 1}, T(1)));
  beta_ = store.add_parameter(name + ".beta", Tensor<T>(Shape{1, channels, 1, 1}, T(0)));
}

template <typename T>
Var<T> LayerNorm2d<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::layer_norm_channels(tape, x, gamma_, beta_);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels) {
  gamma_ = store.add_parameter(name + ".gamma", Tensor<T>(Shape{1, channels, 1, 1}, T(1)));
  beta_ = store.add_parameter(name + ".beta", Tensor<T>(Shape{1, channels, 1, 1}, T(0)));
  mean_ = store.add_buffer(name + ".running_mean", Tensor<T>(Shape{1, channels, 1, 1}, T(0)));
  var_ = store.add_buffer(name + ".running_var", Tensor<T>(Shape{1, channels, 1, 1}, T(1)));
}

template <typename T>
Var<T> BatchNorm2d<T>::operator()(Tape<T>& tape, const Var<T>& x, bool training) const {
  return ops::batch_norm(tape, x, gamma_, beta_, mean_->value, var_->value, training);
}

template class ParamStore<float>;
template class ParamStore<double>;
template Tensor<float> Initializer::uniform<float>(Shape, double);
template Tensor<double> Initializer::uniform<double>(Shape, double);
template class Conv2d<float>;
template class Conv2d<double>;
template class DepthwiseConv2d<float>;
template class DepthwiseConv2d<double>;
template class LayerNorm2d<float>;
template class LayerNorm2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;

}  // namespace dualtrace::nn

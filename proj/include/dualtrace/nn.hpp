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
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dualtrace/ops.hpp"

namespace dualtrace::nn {

/// Named, ordered collection of trainable parameters and non-trainable
/// buffers (normalization statistics). Order is registration order, which is
/// also checkpoint order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool trainable = true;
  };

  Var<T> add_parameter(const std::string& name, Tensor<T> init);
  Var<T> add_buffer(const std::string& name, Tensor<T> init);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  /// Returns nullptr when absent.
  Var<T> find(std::string_view name) const;

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  Var<T> add(const std::string& name, Tensor<T> init, bool trainable);
  std::vector<Entry> entries_;
};

/// Deterministic parameter initialization from a seed.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  /// U(-bound, bound) for every element.
  template <typename T>
  Tensor<T> uniform(Shape shape, double bound);

  std::mt19937_64& rng() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore<T>& store, const std::string& name, int in_channels, int out_channels,
         int ksize, ops::ConvGeometry geom, bool with_bias, Initializer& init);

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  const Var<T>& weight() const noexcept { return weight_; }
  const Var<T>& bias() const noexcept { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  ops::ConvGeometry geom_;
};

template <typename T>
class DepthwiseConv2d {
 public:
  DepthwiseConv2d() = default;
  DepthwiseConv2d(ParamStore<T>& store, const std::string& name, int channels, int ksize,
                  Initializer& init);

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  const Var<T>& weight() const noexcept { return weight_; }
  const Var<T>& bias() const noexcept { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  int pad_ = 0;
};

/// Channel-wise layer normalization (statistics per spatial location).
template <typename T>
class LayerNorm2d {
 public:
  LayerNorm2d() = default;
  LayerNorm2d(ParamStore<T>& store, const std::string& name, int channels);

  Var<T> operator()(Tape<T>& tape, const Var<T>& x) const;

  const Var<T>& gamma() const noexcept { return gamma_; }
  const Var<T>& beta() const noexcept { return beta_; }

 private:
  Var<T> gamma_;
  Var<T> beta_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels);

  /// Training mode updates the running statistics in place.
  Var<T> operator()(Tape<T>& tape, const Var<T>& x, bool training) const;

  const Var<T>& gamma() const noexcept { return gamma_; }
  const Var<T>& beta() const noexcept { return beta_; }
  const Var<T>& running_mean() const noexcept { return mean_; }
  const Var<T>& running_var() const noexcept { return var_; }

 private:
  Var<T> gamma_;
  Var<T> beta_;
  Var<T> mean_;
  Var<T> var_;
};

}  // namespace dualtrace::nn

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

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dualtrace/tensor.hpp"

namespace dualtrace::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, T lo = T(-1), T hi = T(1)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
std::vector<T> random_vector(std::size_t n, std::uint64_t seed, T lo = T(-1), T hi = T(1)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return v;
}

template <typename T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

inline double max_abs(std::span<const float> a) {
  double m = 0.0;
  for (float v : a) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

}  // namespace dualtrace::testing

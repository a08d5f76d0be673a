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

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dualtrace/error.hpp"

namespace dualtrace {

/// NCHW extent of a feature map. Scalars are 1x1x1x1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  constexpr std::size_t sample() const noexcept { return plane() * c; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const;
};

/// Dense row-major NCHW array. Value semantics; copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    require(data_.size() == shape_.numel(), Errc::ShapeMismatch,
            "tensor storage of " + std::to_string(data_.size()) + " values for shape " +
                shape_.str());
  }

  static Tensor scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T* sample(int n) noexcept { return data_.data() + n * shape_.sample(); }
  const T* sample(int n) const noexcept { return data_.data() + n * shape_.sample(); }
  T* plane(int n, int c) noexcept { return sample(n) + c * shape_.plane(); }
  const T* plane(int n, int c) const noexcept { return sample(n) + c * shape_.plane(); }

  T& operator()(int n, int c, int h, int w) noexcept {
    return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  const T& operator()(int n, int c, int h, int w) const noexcept {
    return data_[((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Reinterprets the storage under a new shape with equal element count.
  Tensor reshaped(Shape shape) const& {
    require(shape.numel() == shape_.numel(), Errc::ShapeMismatch,
            "cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(shape, data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

inline void require_shape(const Shape& got, const Shape& want, const std::string& what) {
  require(got == want, Errc::ShapeMismatch, what + ": expected " + want.str() + ", got " + got.str());
}

}  // namespace dualtrace

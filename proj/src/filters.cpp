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

#include "dualtrace/filters.hpp"

#include <cmath>
#include <type_traits>

#include "dualtrace/kernels/kernels.hpp"

namespace dualtrace::filters {

namespace {

// Below this non-centre sum error a slice counts as already projected.
constexpr double kAlreadyProjected = 1e-7;

template <typename T>
double noncenter_sum(std::span<const T> slice, std::size_t center) {
  double s = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i)
    if (i != center) s += static_cast<double>(slice[i]);
  return s;
}

}  // namespace

template <typename T>
bool project_slice(std::span<T> slice, int ksize) {
  require(ksize % 2 == 1 && slice.size() == static_cast<std::size_t>(ksize) * ksize,
          Errc::ShapeMismatch, "constrained kernel must be square with odd side");
  const std::size_t center = static_cast<std::size_t>(ksize / 2) * ksize + ksize / 2;
  const double sum = noncenter_sum<T>(slice, center);
  if (slice[center] == T(-1) && std::abs(sum - 1.0) <= kAlreadyProjected) return true;
  if (std::abs(sum) < kProjectionEpsilon) return false;

  for (std::size_t i = 0; i < slice.size(); ++i)
    if (i != center) slice[i] = static_cast<T>(static_cast<double>(slice[i]) / sum);
  slice[center] = T(-1);

  if constexpr (!std::is_same_v<T, double>) {
    // Rounding to T can leave the sum off by several ulps of the largest tap;
    // fold the residual into the smallest-magnitude tap, whose ulp is finest.
    std::size_t finest = center == 0 ? 1 : 0;
    for (std::size_t i = 0; i < slice.size(); ++i)
      if (i != center && std::abs(slice[i]) < std::abs(slice[finest])) finest = i;
    const double residual = 1.0 - noncenter_sum<T>(slice, center);
    slice[finest] = static_cast<T>(static_cast<double>(slice[finest]) + residual);
  }
  return true;
}

template <typename T>
ConstrainedKernel<T> project_constrained_kernel(ConstrainedKernel<T> kernel) {
  const Shape s = kernel.weights.shape();
  require(s.h == s.w && s.h % 2 == 1, Errc::ShapeMismatch,
          "constrained kernel must be square with odd side, got " + s.str());
  const std::size_t kk = s.plane();
  for (int o = 0; o < s.n; ++o)
    for (int i = 0; i < s.c; ++i) {
      std::span<T> slice(kernel.weights.plane(o, i), kk);
      if (!project_slice(slice, s.h))
        fail(Errc::DegenerateKernel, "slice (" + std::to_string(o) + ", " + std::to_string(i) +
                                         ") has non-centre sum below " +
                                         std::to_string(kProjectionEpsilon));
    }
  return kernel;
}

template <typename T>
ConstraintReport verify_constraint(const Tensor<T>& weights) {
  const Shape s = weights.shape();
  const std::size_t kk = s.plane();
  const std::size_t center = static_cast<std::size_t>(s.h / 2) * s.w + s.w / 2;
  ConstraintReport report;
  for (int o = 0; o < s.n; ++o)
    for (int i = 0; i < s.c; ++i) {
      std::span<const T> slice(weights.plane(o, i), kk);
      report.max_center_error =
          std::max(report.max_center_error, std::abs(static_cast<double>(slice[center]) + 1.0));
      report.max_sum_error =
          std::max(report.max_sum_error, std::abs(noncenter_sum<T>(slice, center) - 1.0));
    }
  return report;
}

template <typename T>
Tensor<T> bayar_forward(const Tensor<T>& x, const ConstrainedKernel<T>& kernel) {
  Tape<T> tape(false);
  const int pad = kernel.ksize() / 2;
  auto out = ops::conv2d(tape, tape.constant(x), tape.constant(kernel.weights), Var<T>{},
                         ops::ConvGeometry{1, pad, 1});
  return std::move(out->value);
}

template <typename T>
ConstrainedConv<T>::ConstrainedConv(nn::ParamStore<T>& store, const std::string& name,
                                    int in_channels, int out_channels, int ksize,
                                    nn::Initializer& init)
    : ksize_(ksize) {
  require(ksize % 2 == 1, Errc::ConfigError, name + ": constrained kernel side must be odd");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * ksize * ksize);
  weight_ = store.add_parameter(
      name + ".weight", init.uniform<T>(Shape{out_channels, in_channels, ksize, ksize}, bound));
  project(init);
}

template <typename T>
Var<T> ConstrainedConv<T>::operator()(Tape<T>& tape, const Var<T>& x) const {
  return ops::conv2d(tape, x, weight_, Var<T>{}, ops::ConvGeometry{1, ksize_ / 2, 1});
}

template <typename T>
int ConstrainedConv<T>::project(nn::Initializer& reinit) {
  Tensor<T>& w = weight_->value;
  const Shape s = w.shape();
  const double bound = 1.0 / std::sqrt(static_cast<double>(s.c) * s.h * s.w);
  int redrawn = 0;
  for (int o = 0; o < s.n; ++o)
    for (int i = 0; i < s.c; ++i) {
      std::span<T> slice(w.plane(o, i), s.plane());
      while (!project_slice(slice, s.h)) {
        const Tensor<T> fresh = reinit.uniform<T>(Shape{1, 1, s.h, s.w}, bound);
        std::copy(fresh.values().begin(), fresh.values().end(), slice.begin());
        ++redrawn;
      }
    }
  return redrawn;
}

template <typename T>
ConstraintReport ConstrainedConv<T>::verify() const {
  return verify_constraint(weight_->value);
}

SrmBank SrmBank::standard() {
  SrmBank bank;
  bank.filters.push_back(SrmFilter{"first_order_h", 5,
                                   {0, 0, 0, 0, 0,  //
                                    0, 0, 0, 0, 0,  //
                                    0, 1, -2, 1, 0,  //
                                    0, 0, 0, 0, 0,  //
                                    0, 0, 0, 0, 0},
                                   2.0});
  bank.filters.push_back(SrmFilter{"second_order_kb", 5,
                                   {0, 0, 0, 0, 0,  //
                                    0, -1, 2, -1, 0,  //
                                    0, 2, -4, 2, 0,  //
                                    0, -1, 2, -1, 0,  //
                                    0, 0, 0, 0, 0},
                                   4.0});
  bank.filters.push_back(SrmFilter{"fifth_order_kv", 5,
                                   {-1, 2, -2, 2, -1,  //
                                    2, -6, 8, -6, 2,  //
                                    -2, 8, -12, 8, -2,  //
                                    2, -6, 8, -6, 2,  //
                                    -1, 2, -2, 2, -1},
                                   12.0});
  return bank;
}

template <typename T>
Tensor<T> SrmBank::weights() const {
  require(!filters.empty(), Errc::ConfigError, "SRM bank is empty");
  const int k = filters.front().ksize;
  Tensor<T> w(Shape{out_channels(), in_channels, k, k});
  for (int o = 0; o < out_channels(); ++o) {
    const SrmFilter& f = filters[o];
    require(f.ksize == k && f.taps.size() == static_cast<std::size_t>(k) * k, Errc::ConfigError,
            "SRM filter '" + f.name + "' does not match the bank kernel size");
    for (int i = 0; i < in_channels; ++i)
      for (int t = 0; t < k * k; ++t)
        w.plane(o, i)[t] = static_cast<T>(f.taps[t] / f.divisor / in_channels);
  }
  return w;
}

template <typename T>
Tensor<T> srm_forward(const Tensor<T>& x, const SrmBank& bank) {
  require(x.shape().c == bank.in_channels, Errc::ShapeMismatch,
          "srm_forward: expected " + std::to_string(bank.in_channels) + " channels, got " +
              x.shape().str());
  const Tensor<T> w = bank.weights<T>();
  Tape<T> tape(false);
  auto out = ops::conv2d(tape, tape.constant(x), tape.constant(w), Var<T>{},
                         ops::ConvGeometry{1, w.shape().h / 2, 1});
  Tensor<T> r = std::move(out->value);
  const T scale = static_cast<T>(bank.input_scale);
  const T t = static_cast<T>(bank.threshold);
  for (auto& v : r.values()) v = std::clamp(v * scale, -t, t);
  return r;
}

namespace {

template <typename T>
std::array<T, 9> as_kernel(const std::array<int, 9>& taps) {
  std::array<T, 9> k{};
  for (int i = 0; i < 9; ++i) k[i] = static_cast<T>(taps[i]);
  return k;
}

// Direct stencil written as differences of mirrored taps, so constant
// neighbourhoods cancel exactly regardless of accumulation order.
template <typename T>
void sobel_planes(const Tensor<T>& x, Tensor<T>& gx, Tensor<T>& gy) {
  require(!x.empty(), Errc::ShapeMismatch, "sobel: empty input");
  const Shape s = x.shape();
  gx = Tensor<T>(s);
  gy = Tensor<T>(s);
  const int h = s.h, w = s.w;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.plane(n, c);
      T* ox = gx.plane(n, c);
      T* oy = gy.plane(n, c);
      auto at = [&](int y, int xx) -> T {
        return (y < 0 || y >= h || xx < 0 || xx >= w) ? T(0) : in[y * w + xx];
      };
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          ox[y * w + xx] = (at(y - 1, xx + 1) - at(y - 1, xx - 1)) +
                           T(2) * (at(y, xx + 1) - at(y, xx - 1)) +
                           (at(y + 1, xx + 1) - at(y + 1, xx - 1));
          oy[y * w + xx] = (at(y + 1, xx - 1) - at(y - 1, xx - 1)) +
                           T(2) * (at(y + 1, xx) - at(y - 1, xx)) +
                           (at(y + 1, xx + 1) - at(y - 1, xx + 1));
        }
    }
}

}  // namespace

template <typename T>
SobelMaps<T> sobel_gradients(const Tensor<T>& x) {
  SobelMaps<T> maps;
  sobel_planes(x, maps.gx, maps.gy);
  maps.magnitude = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    maps.magnitude[i] = std::sqrt(maps.gx[i] * maps.gx[i] + maps.gy[i] * maps.gy[i]);
  return maps;
}

template <typename T>
Var<T> sobel_magnitude(Tape<T>& tape, const Var<T>& x) {
  Tensor<T> gx, gy;
  sobel_planes(x->value, gx, gy);
  Tensor<T> mag(x->value.shape());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return tape.record(std::move(mag), {&x}, [x, gx = std::move(gx), gy = std::move(gy)](const Node<T>& out) {
    constexpr SobelPair pair = SobelPair::standard();
    const auto kx = as_kernel<T>(pair.gx);
    const auto ky = as_kernel<T>(pair.gy);
    const Shape s = x->value.shape();
    const kernels::PlaneGeometry g{s.h, s.w, 3, 1, 1};
    Tensor<T> dgx(s), dgy(s);
    for (std::size_t i = 0; i < out.value.size(); ++i) {
      const T m = out.value[i];
      if (m > T(0)) {
        dgx[i] = out.grad[i] * gx[i] / m;
        dgy[i] = out.grad[i] * gy[i] / m;
      }
    }
    Tensor<T>& dx = x->grad_buffer();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        kernels::dw_backward_input(dgx.plane(n, c), kx.data(), dx.plane(n, c), g);
        kernels::dw_backward_input(dgy.plane(n, c), ky.data(), dx.plane(n, c), g);
      }
  });
}

#define DUALTRACE_INSTANTIATE_FILTERS(T)                                                \
  template bool project_slice(std::span<T>, int);                                      \
  template ConstrainedKernel<T> project_constrained_kernel(ConstrainedKernel<T>);      \
  template ConstraintReport verify_constraint(const Tensor<T>&);                       \
  template Tensor<T> bayar_forward(const Tensor<T>&, const ConstrainedKernel<T>&);     \
  template class ConstrainedConv<T>;                                                   \
  template Tensor<T> SrmBank::weights<T>() const;                                      \
  template Tensor<T> srm_forward(const Tensor<T>&, const SrmBank&);                    \
  template SobelMaps<T> sobel_gradients(const Tensor<T>&);                             \
  template Var<T> sobel_magnitude(Tape<T>&, const Var<T>&);

DUALTRACE_INSTANTIATE_FILTERS(float)
DUALTRACE_INSTANTIATE_FILTERS(double)

}  // namespace dualtrace::filters

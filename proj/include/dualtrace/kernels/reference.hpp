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

// Scalar reference kernels. Every SIMD variant is tested against these, and
// the double-precision build of the network runs on them exclusively.

#include <cmath>
#include <cstddef>

namespace dualtrace::kernels {

/// Geometry of a stride-1 single-plane correlation with zero padding.
struct PlaneGeometry {
  int h = 0;
  int w = 0;
  int ksize = 1;
  int pad = 0;
  int dilation = 1;

  constexpr int out_h() const noexcept { return h + 2 * pad - dilation * (ksize - 1); }
  constexpr int out_w() const noexcept { return w + 2 * pad - dilation * (ksize - 1); }
};

namespace ref {

/// C = alpha * op(A) * op(B) + beta * C, all row-major. op(A) is m x k, op(B) is k x n.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
          const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    if (!trans_b) {
      for (int p = 0; p < k; ++p) {
        const T aip = alpha * (trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                       : a[static_cast<std::ptrdiff_t>(i) * lda + p]);
        const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    } else {
      for (int j = 0; j < n; ++j) {
        const T* bcol = b + static_cast<std::ptrdiff_t>(j) * ldb;
        T sum = T(0);
        for (int p = 0; p < k; ++p) {
          const T aip = trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                : a[static_cast<std::ptrdiff_t>(i) * lda + p];
          sum += aip * bcol[p];
        }
        crow[j] += alpha * sum;
      }
    }
  }
}

namespace detail {

// Range of output columns whose input column ox - pad + kx*dil lies inside [0, w).
inline void column_range(const PlaneGeometry& g, int kx, int& lo, int& hi) {
  const int shift = kx * g.dilation - g.pad;
  lo = shift < 0 ? -shift : 0;
  hi = g.w - shift;
  if (hi > g.out_w()) hi = g.out_w();
}

}  // namespace detail

/// out += correlate(in, kernel). Output plane is out_h() x out_w().
template <typename T>
void dw_forward(const T* in, const T* kernel, T* out, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      const T kv = kernel[ky * g.ksize + kx];
      int lo = 0, hi = 0;
      detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        const T* irow = in + static_cast<std::ptrdiff_t>(iy) * g.w + shift;
        T* orow = out + static_cast<std::ptrdiff_t>(oy) * ow;
        for (int ox = lo; ox < hi; ++ox) orow[ox] += kv * irow[ox];
      }
    }
  }
}

/// din += transposed correlation of dout with kernel.
template <typename T>
void dw_backward_input(const T* dout, const T* kernel, T* din, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      const T kv = kernel[ky * g.ksize + kx];
      int lo = 0, hi = 0;
      detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        T* irow = din + static_cast<std::ptrdiff_t>(iy) * g.w + shift;
        const T* orow = dout + static_cast<std::ptrdiff_t>(oy) * ow;
        for (int ox = lo; ox < hi; ++ox) irow[ox] += kv * orow[ox];
      }
    }
  }
}

/// dkernel += sum over output pixels of dout * shifted input.
template <typename T>
void dw_backward_weight(const T* dout, const T* in, T* dkernel, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      int lo = 0, hi = 0;
      detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      T sum = T(0);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        const T* irow = in + static_cast<std::ptrdiff_t>(iy) * g.w + shift;
        const T* orow = dout + static_cast<std::ptrdiff_t>(oy) * ow;
        for (int ox = lo; ox < hi; ++ox) sum += orow[ox] * irow[ox];
      }
      dkernel[ky * g.ksize + kx] += sum;
    }
  }
}

/// Exact (erf-based) GELU.
template <typename T>
void gelu_forward(const T* x, T* y, std::size_t n) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  for (std::size_t i = 0; i < n; ++i) y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * kInvSqrt2));
}

/// dx += dy * gelu'(x).
template <typename T>
void gelu_backward(const T* x, const T* dy, T* dx, std::size_t n) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x[i];
    const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
    const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
    dx[i] += dy[i] * (cdf + v * pdf);
  }
}

}  // namespace ref
}  // namespace dualtrace::kernels

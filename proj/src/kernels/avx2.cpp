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

// Compiled with -mavx2 -mfma. Only reachable after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "table.hpp"

namespace dualtrace::kernels {
namespace avx2 {

using vec_t = __m256;
constexpr int kLanes = 8;
constexpr int kMR = 6;
constexpr int kNV = 2;

inline vec_t vzero() { return _mm256_setzero_ps(); }
inline vec_t vset1(float v) { return _mm256_set1_ps(v); }
inline vec_t vload(const float* p) { return _mm256_loadu_ps(p); }
inline void vstore(float* p, vec_t v) { _mm256_storeu_ps(p, v); }
inline vec_t vfma(vec_t a, vec_t b, vec_t c) { return _mm256_fmadd_ps(a, b, c); }
inline vec_t vmul(vec_t a, vec_t b) { return _mm256_mul_ps(a, b); }

#include "gemm_driver.inl"

// Cephes-style exp, valid to ~1 ulp over the clamped range.
inline __m256 exp_ps(__m256 x) {
  x = _mm256_min_ps(x, _mm256_set1_ps(88.3762626647949f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-88.3762626647949f));
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  const __m256 x2 = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, x2, _mm256_add_ps(x, _mm256_set1_ps(1.0f)));
  __m256i e = _mm256_cvttps_epi32(fx);
  e = _mm256_add_epi32(e, _mm256_set1_epi32(127));
  e = _mm256_slli_epi32(e, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

// Abramowitz-Stegun 7.1.26, |error| < 1.5e-7.
inline __m256 erf_ps(__m256 x) {
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  const __m256 sign = _mm256_and_ps(x, sign_mask);
  const __m256 ax = _mm256_andnot_ps(sign_mask, x);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 t = _mm256_div_ps(one, _mm256_fmadd_ps(_mm256_set1_ps(0.3275911f), ax, one));
  __m256 poly = _mm256_set1_ps(1.061405429f);
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(-1.453152027f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(1.421413741f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(-0.284496736f));
  poly = _mm256_fmadd_ps(poly, t, _mm256_set1_ps(0.254829592f));
  poly = _mm256_mul_ps(poly, t);
  const __m256 e = exp_ps(_mm256_sub_ps(_mm256_setzero_ps(), _mm256_mul_ps(ax, ax)));
  const __m256 r = _mm256_fnmadd_ps(poly, e, one);
  return _mm256_or_ps(r, sign);
}

void gelu_forward(const float* x, float* y, std::size_t n) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf_ps(_mm256_mul_ps(v, inv_sqrt2))));
    _mm256_storeu_ps(y + i, _mm256_mul_ps(v, cdf));
  }
  if (i < n) ref::gelu_forward(x + i, y + i, n - i);
}

void gelu_backward(const float* x, const float* dy, float* dx, std::size_t n) {
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 inv_sqrt2 = _mm256_set1_ps(0.70710678118654752f);
  const __m256 inv_sqrt2pi = _mm256_set1_ps(0.39894228040143268f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 cdf = _mm256_mul_ps(half, _mm256_add_ps(one, erf_ps(_mm256_mul_ps(v, inv_sqrt2))));
    const __m256 pdf =
        _mm256_mul_ps(inv_sqrt2pi, exp_ps(_mm256_mul_ps(_mm256_set1_ps(-0.5f), _mm256_mul_ps(v, v))));
    const __m256 d = _mm256_fmadd_ps(v, pdf, cdf);
    _mm256_storeu_ps(dx + i, _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), d, _mm256_loadu_ps(dx + i)));
  }
  if (i < n) ref::gelu_backward(x + i, dy + i, dx + i, n - i);
}

inline void axpy_row(float alpha, const float* x, float* y, int lo, int hi) {
  const __m256 va = _mm256_set1_ps(alpha);
  int i = lo;
  for (; i + 8 <= hi; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < hi; ++i) y[i] += alpha * x[i];
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, lo);
  lo = _mm_add_ss(lo, sh);
  return _mm_cvtss_f32(lo);
}

void dw_forward(const float* in, const float* kernel, float* out, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      const float kv = kernel[ky * g.ksize + kx];
      int lo = 0, hi = 0;
      ref::detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        axpy_row(kv, in + static_cast<std::ptrdiff_t>(iy) * g.w + shift,
                 out + static_cast<std::ptrdiff_t>(oy) * ow, lo, hi);
      }
    }
  }
}

void dw_backward_input(const float* dout, const float* kernel, float* din, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      const float kv = kernel[ky * g.ksize + kx];
      int lo = 0, hi = 0;
      ref::detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        axpy_row(kv, dout + static_cast<std::ptrdiff_t>(oy) * ow,
                 din + static_cast<std::ptrdiff_t>(iy) * g.w + shift, lo, hi);
      }
    }
  }
}

void dw_backward_weight(const float* dout, const float* in, float* dkernel, const PlaneGeometry& g) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int ky = 0; ky < g.ksize; ++ky) {
    for (int kx = 0; kx < g.ksize; ++kx) {
      int lo = 0, hi = 0;
      ref::detail::column_range(g, kx, lo, hi);
      const int shift = kx * g.dilation - g.pad;
      __m256 acc = _mm256_setzero_ps();
      float tail = 0.0f;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy - g.pad + ky * g.dilation;
        if (iy < 0 || iy >= g.h) continue;
        const float* irow = in + static_cast<std::ptrdiff_t>(iy) * g.w + shift;
        const float* orow = dout + static_cast<std::ptrdiff_t>(oy) * ow;
        int ox = lo;
        for (; ox + 8 <= hi; ox += 8)
          acc = _mm256_fmadd_ps(_mm256_loadu_ps(orow + ox), _mm256_loadu_ps(irow + ox), acc);
        for (; ox < hi; ++ox) tail += orow[ox] * irow[ox];
      }
      dkernel[ky * g.ksize + kx] += hsum(acc) + tail;
    }
  }
}

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  gemm_blocked(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace avx2

const FloatKernels& avx2_kernels() noexcept {
  static const FloatKernels table{
      avx2::gemm,
      avx2::dw_forward,
      avx2::dw_backward_input,
      avx2::dw_backward_weight,
      avx2::gelu_forward,
      avx2::gelu_backward,
  };
  return table;
}

}  // namespace dualtrace::kernels

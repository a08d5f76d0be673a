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

// Compiled with -mavx512f -mavx2 -mfma. GEMM only; the elementwise and
// depthwise kernels reuse the AVX2 variants.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "table.hpp"

namespace dualtrace::kernels {
namespace avx512 {

using vec_t = __m512;
constexpr int kLanes = 16;
constexpr int kMR = 12;
constexpr int kNV = 2;

inline vec_t vzero() { return _mm512_setzero_ps(); }
inline vec_t vset1(float v) { return _mm512_set1_ps(v); }
inline vec_t vload(const float* p) { return _mm512_loadu_ps(p); }
inline void vstore(float* p, vec_t v) { _mm512_storeu_ps(p, v); }
inline vec_t vfma(vec_t a, vec_t b, vec_t c) { return _mm512_fmadd_ps(a, b, c); }
inline vec_t vmul(vec_t a, vec_t b) { return _mm512_mul_ps(a, b); }

#include "gemm_driver.inl"

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  gemm_blocked(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace avx512

const FloatKernels& avx512_kernels() noexcept {
  static const FloatKernels table = [] {
    FloatKernels t = avx2_kernels();
    t.gemm = avx512::gemm;
    return t;
  }();
  return table;
}

}  // namespace dualtrace::kernels

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

// Blocked GEMM driver shared by the SIMD translation units. It is included
// inside an ISA-specific namespace, which must provide:
//   vec_t, kLanes, kMR, kNV, vzero(), vset1(), vload(), vstore(), vfma(), vmul()
// Packing and blocking are fixed, so every C element sees the same
// accumulation order regardless of thread count.

constexpr int kNR = kNV * kLanes;
constexpr int kKC = 256;
constexpr int kMC = kMR * 16;
constexpr int kNC = kNR * 96;

inline float* scratch(std::vector<float>& buf, std::size_t n) {
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

inline void pack_a(bool ta, const float* a, int lda, int i0, int mc, int p0, int kc, float* out) {
  for (int ir = 0; ir < mc; ir += kMR) {
    const int rows = std::min(kMR, mc - ir);
    if (!ta) {
      for (int i = 0; i < kMR; ++i) {
        if (i < rows) {
          const float* src = a + static_cast<std::ptrdiff_t>(i0 + ir + i) * lda + p0;
          for (int p = 0; p < kc; ++p) out[p * kMR + i] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kMR + i] = 0.0f;
        }
      }
    } else {
      for (int p = 0; p < kc; ++p) {
        const float* src = a + static_cast<std::ptrdiff_t>(p0 + p) * lda + i0 + ir;
        int i = 0;
        for (; i < rows; ++i) out[p * kMR + i] = src[i];
        for (; i < kMR; ++i) out[p * kMR + i] = 0.0f;
      }
    }
    out += static_cast<std::ptrdiff_t>(kMR) * kc;
  }
}

inline void pack_b(bool tb, const float* b, int ldb, int p0, int kc, int j0, int nc, float* out) {
  for (int jr = 0; jr < nc; jr += kNR) {
    const int cols = std::min(kNR, nc - jr);
    if (!tb) {
      for (int p = 0; p < kc; ++p) {
        const float* src = b + static_cast<std::ptrdiff_t>(p0 + p) * ldb + j0 + jr;
        float* dst = out + p * kNR;
        int j = 0;
        for (; j < cols; ++j) dst[j] = src[j];
        for (; j < kNR; ++j) dst[j] = 0.0f;
      }
    } else {
      for (int j = 0; j < kNR; ++j) {
        if (j < cols) {
          const float* src = b + static_cast<std::ptrdiff_t>(j0 + jr + j) * ldb + p0;
          for (int p = 0; p < kc; ++p) out[p * kNR + j] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kNR + j] = 0.0f;
        }
      }
    }
    out += static_cast<std::ptrdiff_t>(kNR) * kc;
  }
}

inline void micro_kernel(int kc, const float* pa, const float* pb, float alpha, float beta,
                         float* c, int ldc, int rows, int cols) {
  vec_t acc[kMR][kNV];
#pragma GCC unroll 16
  for (int i = 0; i < kMR; ++i)
#pragma GCC unroll 4
    for (int v = 0; v < kNV; ++v) acc[i][v] = vzero();

  for (int p = 0; p < kc; ++p) {
    vec_t bv[kNV];
#pragma GCC unroll 4
    for (int v = 0; v < kNV; ++v) bv[v] = vload(pb + v * kLanes);
#pragma GCC unroll 16
    for (int i = 0; i < kMR; ++i) {
      const vec_t av = vset1(pa[i]);
#pragma GCC unroll 4
      for (int v = 0; v < kNV; ++v) acc[i][v] = vfma(av, bv[v], acc[i][v]);
    }
    pa += kMR;
    pb += kNR;
  }

  const vec_t valpha = vset1(alpha);
  if (rows == kMR && cols == kNR) {
    const vec_t vbeta = vset1(beta);
#pragma GCC unroll 16
    for (int i = 0; i < kMR; ++i) {
      float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
#pragma GCC unroll 4
      for (int v = 0; v < kNV; ++v) {
        vec_t r = vmul(valpha, acc[i][v]);
        if (beta != 0.0f) r = vfma(vbeta, vload(crow + v * kLanes), r);
        vstore(crow + v * kLanes, r);
      }
    }
    return;
  }
  alignas(64) float tile[kMR * kNR];
  for (int i = 0; i < kMR; ++i)
    for (int v = 0; v < kNV; ++v) vstore(tile + i * kNR + v * kLanes, vmul(valpha, acc[i][v]));
  for (int i = 0; i < rows; ++i) {
    float* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    for (int j = 0; j < cols; ++j) {
      crow[j] = beta == 0.0f ? tile[i * kNR + j] : tile[i * kNR + j] + beta * crow[j];
    }
  }
}

inline void gemm_blocked(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                         int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  thread_local std::vector<float> a_buf;
  thread_local std::vector<float> b_buf;

  if (k <= 0) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        float& v = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
        v = beta == 0.0f ? 0.0f : beta * v;
      }
    return;
  }

  for (int jc = 0; jc < n; jc += kNC) {
    const int nc = std::min(kNC, n - jc);
    const int npanels = (nc + kNR - 1) / kNR;
    for (int pc = 0; pc < k; pc += kKC) {
      const int kc = std::min(kKC, k - pc);
      const float beta_eff = pc == 0 ? beta : 1.0f;
      float* pb = scratch(b_buf, static_cast<std::size_t>(npanels) * kNR * kc);
      pack_b(tb, b, ldb, pc, kc, jc, nc, pb);
      for (int ic = 0; ic < m; ic += kMC) {
        const int mc = std::min(kMC, m - ic);
        float* pa = scratch(a_buf, static_cast<std::size_t>((mc + kMR - 1) / kMR) * kMR * kc);
        pack_a(ta, a, lda, ic, mc, pc, kc, pa);
        const float* pa_const = pa;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (npanels >= 4 && mc * kc >= 4096)
#endif
        for (int jp = 0; jp < npanels; ++jp) {
          const int jr = jp * kNR;
          const int cols = std::min(kNR, nc - jr);
          const float* pbj = pb + static_cast<std::ptrdiff_t>(jp) * kNR * kc;
          for (int ir = 0; ir < mc; ir += kMR) {
            const int rows = std::min(kMR, mc - ir);
            micro_kernel(kc, pa_const + static_cast<std::ptrdiff_t>(ir) * kc, pbj, alpha,
                         beta_eff, c + static_cast<std::ptrdiff_t>(ic + ir) * ldc + jc + jr, ldc,
                         rows, cols);
          }
        }
      }
    }
  }
}

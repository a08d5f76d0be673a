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

// Runtime-dispatched compute kernels. float calls route to the best SIMD
// variant the host supports (overridable for testing); double calls always
// run the scalar reference.

#include <cstddef>
#include <string_view>

#include "dualtrace/kernels/reference.hpp"

namespace dualtrace::kernels {

enum class Isa { Scalar, Avx2, Avx512 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
Isa best_isa() noexcept;
Isa active_isa() noexcept;

/// Selects the variant used by subsequent float calls. Throws ConfigError when
/// the host cannot run it.
void set_active_isa(Isa isa);

/// Parses "scalar" / "avx2" / "avx512"; throws ConfigError otherwise.
Isa parse_isa(std::string_view name);

class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

void dw_forward(const float* in, const float* kernel, float* out, const PlaneGeometry& g);
void dw_forward(const double* in, const double* kernel, double* out, const PlaneGeometry& g);
void dw_backward_input(const float* dout, const float* kernel, float* din, const PlaneGeometry& g);
void dw_backward_input(const double* dout, const double* kernel, double* din,
                       const PlaneGeometry& g);
void dw_backward_weight(const float* dout, const float* in, float* dkernel,
                        const PlaneGeometry& g);
void dw_backward_weight(const double* dout, const double* in, double* dkernel,
                        const PlaneGeometry& g);

void gelu_forward(const float* x, float* y, std::size_t n);
void gelu_forward(const double* x, double* y, std::size_t n);
void gelu_backward(const float* x, const float* dy, float* dx, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace dualtrace::kernels

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

#include "table.hpp"

namespace dualtrace::kernels {

namespace {

void gemm_scalar(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
  ref::gemm<float>(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace

const FloatKernels& scalar_kernels() noexcept {
  static const FloatKernels table{
      gemm_scalar,
      ref::dw_forward<float>,
      ref::dw_backward_input<float>,
      ref::dw_backward_weight<float>,
      ref::gelu_forward<float>,
      ref::gelu_backward<float>,
  };
  return table;
}

}  // namespace dualtrace::kernels

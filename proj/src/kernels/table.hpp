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

#include <cstddef>

#include "dualtrace/kernels/reference.hpp"

namespace dualtrace::kernels {

struct FloatKernels {
  void (*gemm)(bool, bool, int, int, int, float, const float*, int, const float*, int, float,
               float*, int);
  void (*dw_forward)(const float*, const float*, float*, const PlaneGeometry&);
  void (*dw_backward_input)(const float*, const float*, float*, const PlaneGeometry&);
  void (*dw_backward_weight)(const float*, const float*, float*, const PlaneGeometry&);
  void (*gelu_forward)(const float*, float*, std::size_t);
  void (*gelu_backward)(const float*, const float*, float*, std::size_t);
};

const FloatKernels& scalar_kernels() noexcept;
// Defined only when the corresponding translation unit is built (x86-64).
const FloatKernels& avx2_kernels() noexcept;
const FloatKernels& avx512_kernels() noexcept;

}  // namespace dualtrace::kernels

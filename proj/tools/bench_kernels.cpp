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

// Micro-benchmark for the dispatched float kernels.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "dualtrace/kernels/kernels.hpp"

using namespace dualtrace::kernels;

namespace {

template <typename Fn>
double seconds_per_call(Fn&& fn) {
  fn();
  int reps = 0;
  const auto start = std::chrono::steady_clock::now();
  double elapsed = 0.0;
  do {
    fn();
    ++reps;
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } while (elapsed < 0.3);
  return elapsed / reps;
}

}  // namespace

int main() {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  const int shapes[][3] = {{128, 4096, 32}, {32, 4096, 128}, {32, 128, 4096}, {256, 256, 1152}};
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512}) {
    if (!isa_supported(isa)) continue;
    set_active_isa(isa);
    for (const auto& s : shapes) {
      const int m = s[0], n = s[1], k = s[2];
      std::vector<float> a(m * k), b(k * n), c(m * n);
      for (auto& v : a) v = dist(rng);
      for (auto& v : b) v = dist(rng);
      for (int mode = 0; mode < 2; ++mode) {
        const bool tb = mode == 1;
        const double t = seconds_per_call([&] {
          gemm(false, tb, m, n, k, 1.0f, a.data(), k, b.data(), tb ? k : n, 0.0f, c.data(), n);
        });
        std::printf("%-7s gemm m=%4d n=%5d k=%5d tb=%d  %7.2f GFLOP/s\n",
                    std::string(isa_name(isa)).c_str(), m, n, k, tb ? 1 : 0,
                    2.0 * m * n * k / t * 1e-9);
      }
    }
    const PlaneGeometry g{64, 64, 7, 3, 1};
    std::vector<float> in(64 * 64), out(64 * 64), k(49);
    for (auto& v : in) v = dist(rng);
    for (auto& v : k) v = dist(rng);
    const double t = seconds_per_call([&] { dw_forward(in.data(), k.data(), out.data(), g); });
    std::printf("%-7s dw7x7 64x64 plane %8.2f us\n", std::string(isa_name(isa)).c_str(), t * 1e6);
  }
}

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dualtrace/filters.hpp"
#include "gradcheck.hpp"
#include "test_main.hpp"

using namespace dualtrace;
using namespace dualtrace::filters;
using dualtrace::testing::random_tensor;

namespace {

// Three-step projection written independently of the library.
std::vector<double> oracle_project(std::vector<double> k, int ksize) {
  const int c = (ksize / 2) * ksize + ksize / 2;
  k[c] = 0.0;
  double sum = 0.0;
  for (double v : k) sum += v;
  for (double& v : k) v /= sum;
  k[c] = -1.0;
  return k;
}

// out(y, x) = sum_ij w(i, j) * in(y + i - p, x + j - p), zero outside.
std::vector<double> hand_conv(const std::vector<double>& img, int h, int w,
                              const std::vector<double>& k, int ksize) {
  const int p = ksize / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < ksize; ++i)
        for (int j = 0; j < ksize; ++j) {
          const int yy = y + i - p, xx = x + j - p;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += k[i * ksize + j] * img[yy * w + xx];
        }
      out[y * w + x] = acc;
    }
  return out;
}

template <typename T>
double max_abs(const Tensor<T>& t) {
  double m = 0.0;
  for (T v : t.values()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

}  // namespace

TEST_CASE("projection of an all-ones 3x3 kernel") {
  ConstrainedKernel<double> k{Tensor<double>(Shape{1, 1, 3, 3}, 1.0)};
  auto p = project_constrained_kernel(k);
  for (int i = 0; i < 9; ++i) {
    if (i == 4)
      CHECK(p.weights[i] == -1.0);
    else
      CHECK(p.weights[i] == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  }
}

TEST_CASE("projection leaves a constrained kernel unchanged") {
  ConstrainedKernel<float> k{random_tensor<float>(Shape{2, 3, 5, 5}, 11)};
  auto once = project_constrained_kernel(k);
  auto twice = project_constrained_kernel(once);
  CHECK(once.weights == twice.weights);
}

TEST_CASE("projection matches the three-step oracle on a seed-7 kernel") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> raw(25);
  for (double& v : raw) v = dist(rng);
  const auto want = oracle_project(raw, 5);

  ConstrainedKernel<double> kd{Tensor<double>(Shape{1, 1, 5, 5}, raw)};
  auto gotd = project_constrained_kernel(kd);
  std::vector<float> rawf(raw.begin(), raw.end());
  ConstrainedKernel<float> kf{Tensor<float>(Shape{1, 1, 5, 5}, rawf)};
  auto gotf = project_constrained_kernel(kf);
  for (int i = 0; i < 25; ++i) {
    CHECK(std::abs(gotd.weights[i] - want[i]) <= 1e-12);
    CHECK(std::abs(gotf.weights[i] - want[i]) <= 1e-5 * std::max(1.0, std::abs(want[i])));
  }
}

TEST_CASE("projection invariants and idempotence on 1000 random kernels") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> raw(25);
    for (double& v : raw) v = dist(rng);
    double sum = 0.0;
    for (int i = 0; i < 25; ++i)
      if (i != 12) sum += raw[i];
    if (std::abs(sum) < kProjectionEpsilon) continue;
    for (int variant = 0; variant < 2; ++variant) {
      if (variant == 0) {
        auto p = project_constrained_kernel(
            ConstrainedKernel<double>{Tensor<double>(Shape{1, 1, 5, 5}, raw)});
        CHECK(verify_constraint(p.weights).satisfied(1e-6));
        auto q = project_constrained_kernel(p);
        double diff = 0.0;
        for (int i = 0; i < 25; ++i) diff = std::max(diff, std::abs(q.weights[i] - p.weights[i]));
        CHECK(diff <= 1e-9);
      } else {
        std::vector<float> rf(raw.begin(), raw.end());
        auto p = project_constrained_kernel(
            ConstrainedKernel<float>{Tensor<float>(Shape{1, 1, 5, 5}, rf)});
        CHECK(verify_constraint(p.weights).satisfied(1e-6));
        CHECK(project_constrained_kernel(p).weights == p.weights);
      }
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("degenerate kernels are rejected") {
  Tensor<double> w(Shape{1, 1, 3, 3}, 0.0);
  w[4] = 3.0;
  CHECK_THROWS_AS(project_constrained_kernel(ConstrainedKernel<double>{w}), Error);
  try {
    project_constrained_kernel(ConstrainedKernel<double>{w});
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateKernel);
  }
  Tensor<double> even(Shape{1, 1, 4, 4}, 1.0);
  CHECK_THROWS_AS(project_constrained_kernel(ConstrainedKernel<double>{even}), Error);
}

TEST_CASE("constrained layer redraws collapsed slices") {
  nn::ParamStore<float> store;
  nn::Initializer init(3);
  ConstrainedConv<float> conv(store, "bayar", 3, 3, 5, init);
  CHECK(conv.verify().satisfied());
  auto values = conv.weight()->value.values();
  for (int i = 0; i < 25; ++i) values[i] = 0.0f;
  nn::Initializer reinit(99);
  CHECK(conv.project(reinit) == 1);
  CHECK(conv.verify().satisfied());
}

TEST_CASE("bayar_forward annihilates constants and zeros") {
  nn::Initializer init(5);
  auto kernel = project_constrained_kernel(
      ConstrainedKernel<float>{init.uniform<float>(Shape{3, 3, 5, 5}, 1.0)});
  Tensor<float> flat(Shape{2, 3, 16, 16}, 0.37f);
  auto out = bayar_forward(flat, kernel);
  CHECK(out.shape() == Shape{2, 3, 16, 16});
  // Interior only: same padding breaks the unit-sum neighbourhood at borders.
  double worst = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 2; y < 14; ++y)
        for (int x = 2; x < 14; ++x) worst = std::max(worst, std::abs(double(out(n, c, y, x))));
  CHECK(worst <= 1e-5);

  auto single = project_constrained_kernel(
      ConstrainedKernel<float>{init.uniform<float>(Shape{4, 1, 5, 5}, 1.0)});
  auto zeros = bayar_forward(Tensor<float>(Shape{1, 1, 8, 8}, 0.0f), single);
  CHECK(zeros.shape() == Shape{1, 4, 8, 8});
  CHECK(max_abs(zeros) == 0.0);

  CHECK_THROWS_AS(bayar_forward(Tensor<float>(Shape{1, 2, 8, 8}), single), Error);
}

TEST_CASE("bayar impulse response is the flipped kernel") {
  nn::Initializer init(21);
  auto kernel = project_constrained_kernel(
      ConstrainedKernel<double>{init.uniform<double>(Shape{1, 1, 5, 5}, 1.0)});
  std::vector<double> img(81, 0.0);
  img[4 * 9 + 4] = 1.0;
  auto out = bayar_forward(Tensor<double>(Shape{1, 1, 9, 9}, img), kernel);
  std::vector<double> k(kernel.weights.values().begin(), kernel.weights.values().end());
  const auto want = hand_conv(img, 9, 9, k, 5);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      CHECK(std::abs(out(0, 0, y, x) - want[y * 9 + x]) <= 1e-6);
      const int i = 4 - y + 2, j = 4 - x + 2;
      const double flipped = (i >= 0 && i < 5 && j >= 0 && j < 5) ? k[i * 5 + j] : 0.0;
      CHECK(std::abs(out(0, 0, y, x) - flipped) <= 1e-6);
    }
}

TEST_CASE("constrained conv gradients") {
  nn::ParamStore<double> store;
  nn::Initializer init(8);
  ConstrainedConv<double> conv(store, "bayar", 2, 3, 5, init);
  auto x = make_leaf(random_tensor<double>(Shape{1, 2, 6, 6}, 4), true);
  auto readout = random_tensor<double>(Shape{1, 3, 6, 6}, 5);
  auto r = dualtrace::testing::grad_check(
      {{"weight", conv.weight()}, {"x", x}},
      [&](Tape<double>& t) { return ops::weighted_sum(t, conv(t, x), readout); });
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-3);
}

TEST_CASE("standard SRM bank") {
  const auto bank = SrmBank::standard();
  REQUIRE(bank.out_channels() == 3);
  CHECK(bank.threshold == 2.0);
  for (const auto& f : bank.filters) {
    CHECK(f.ksize == 5);
    double sum = 0.0;
    for (double t : f.taps) sum += t / f.divisor;
    CHECK(std::abs(sum) <= 1e-9);
  }
  auto w = bank.weights<double>();
  CHECK(w.shape() == Shape{3, 3, 5, 5});
}

TEST_CASE("srm_forward on constants, clamp and immutability") {
  const auto bank = SrmBank::standard();
  const auto before = bank.weights<float>();
  auto out = srm_forward(Tensor<float>(Shape{1, 3, 16, 16}, 0.6f), bank);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 2; y < 14; ++y)
      for (int x = 2; x < 14; ++x) worst = std::max(worst, std::abs(double(out(0, c, y, x))));
  CHECK(worst <= 1e-5);
  CHECK(bank.weights<float>() == before);

  // First-order residual 255 * (l - 2c + r) / 2 equals 5 for a dip of 5/255.
  Tensor<double> dip(Shape{1, 3, 9, 9}, 0.5);
  for (int c = 0; c < 3; ++c) dip(0, c, 4, 4) = 0.5 - 5.0 / 255.0;
  SrmBank first = bank;
  first.filters = {bank.filters[0]};
  first.threshold = 10.0;
  CHECK(srm_forward(dip, first)(0, 0, 4, 4) == doctest::Approx(5.0).epsilon(1e-9));
  first.threshold = 2.0;
  CHECK(srm_forward(dip, first)(0, 0, 4, 4) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(srm_forward(Tensor<double>(Shape{1, 1, 9, 9}), first), Error);
}

TEST_CASE("srm impulse through the second-order kernel") {
  auto bank = SrmBank::standard();
  bank.filters = {bank.filters[1]};
  bank.threshold = 1e9;
  bank.input_scale = 1.0;
  std::vector<double> plane(81, 0.0);
  plane[4 * 9 + 4] = 1.0;
  Tensor<double> img(Shape{1, 3, 9, 9});
  for (int c = 0; c < 3; ++c) std::copy(plane.begin(), plane.end(), img.plane(0, c));
  auto out = srm_forward(img, bank);
  std::vector<double> k(25);
  for (int i = 0; i < 25; ++i) k[i] = bank.filters[0].taps[i] / bank.filters[0].divisor;
  const auto want = hand_conv(plane, 9, 9, k, 5);
  for (int i = 0; i < 81; ++i) CHECK(std::abs(out.values()[i] - want[i]) <= 1e-6);
}

TEST_CASE("sobel masks") {
  constexpr auto s = SobelPair::standard();
  int sx = 0, sy = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(s.gx[i * 3 + j] == s.gy[j * 3 + i]);
      sx += s.gx[i * 3 + j];
      sy += s.gy[i * 3 + j];
    }
  CHECK(sx == 0);
  CHECK(sy == 0);
}

TEST_CASE("sobel on constants and steps") {
  auto flat = sobel_gradients(Tensor<float>(Shape{1, 2, 9, 9}, 0.8f));
  for (int c = 0; c < 2; ++c)
    for (int y = 1; y < 8; ++y)
      for (int x = 1; x < 8; ++x) {
        CHECK(flat.gx(0, c, y, x) == 0.0f);
        CHECK(flat.gy(0, c, y, x) == 0.0f);
        CHECK(flat.magnitude(0, c, y, x) == 0.0f);
      }

  Tensor<double> vstep(Shape{1, 1, 9, 9}, 0.0);
  Tensor<double> hstep(Shape{1, 1, 9, 9}, 0.0);
  for (int y = 0; y < 9; ++y)
    for (int x = 5; x < 9; ++x) {
      vstep(0, 0, y, x) = 1.0;
      hstep(0, 0, x, y) = 1.0;
    }
  auto v = sobel_gradients(vstep);
  auto h = sobel_gradients(hstep);
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 8; ++x) {
      const double edge = (x == 4 || x == 5) ? 4.0 : 0.0;
      CHECK(v.gx(0, 0, y, x) == edge);
      CHECK(v.gy(0, 0, y, x) == 0.0);
      CHECK(v.magnitude(0, 0, y, x) == edge);
      CHECK(h.gy(0, 0, x, y) == edge);
      CHECK(h.gx(0, 0, x, y) == 0.0);
    }
  for (const auto& m : {v.magnitude, h.magnitude})
    for (double val : m.values()) CHECK(val >= 0.0);
}

TEST_CASE("sobel responses swap under transposition") {
  auto img = random_tensor<double>(Shape{1, 1, 7, 7}, 17);
  Tensor<double> tr(img.shape());
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) tr(0, 0, x, y) = img(0, 0, y, x);
  auto a = sobel_gradients(img);
  auto b = sobel_gradients(tr);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      CHECK(b.gx(0, 0, x, y) == doctest::Approx(a.gy(0, 0, y, x)).epsilon(1e-12));
      CHECK(b.gy(0, 0, x, y) == doctest::Approx(a.gx(0, 0, y, x)).epsilon(1e-12));
    }
}

TEST_CASE("sobel magnitude gradients") {
  auto x = make_leaf(random_tensor<double>(Shape{1, 2, 6, 6}, 31), true);
  auto readout = random_tensor<double>(Shape{1, 2, 6, 6}, 32);
  auto r = dualtrace::testing::grad_check({{"x", x}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, sobel_magnitude(t, x), readout);
  });
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-3);
}

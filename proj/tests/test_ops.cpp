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

#include "dualtrace/kernels/kernels.hpp"
#include "dualtrace/nn.hpp"
#include "gradcheck.hpp"
#include "test_main.hpp"

using namespace dualtrace;
using dualtrace::testing::grad_check;
using dualtrace::testing::random_tensor;

namespace {

Var<double> leaf(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return make_leaf(random_tensor<double>(s, seed, lo, hi), true);
}

void expect_grad_ok(const dualtrace::testing::GradCheckResult& r) {
  INFO(r.worst);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error <= 1e-3);
}

// Direct NCHW convolution, independent of im2col.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, ops::ConvGeometry g) {
  const Shape xs = x.shape(), ws = w.shape();
  const int k = ws.h;
  const int oh = (xs.h + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
  const int ow = (xs.w + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
  Tensor<double> out(Shape{xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = 0.0;
          for (int c = 0; c < xs.c; ++c)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j) {
                const int iy = y * g.stride - g.pad + i * g.dilation;
                const int ix = xx * g.stride - g.pad + j * g.dilation;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w(o, c, i, j) * x(n, c, iy, ix);
              }
          out(n, o, y, xx) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches a direct convolution") {
  for (auto g : {ops::ConvGeometry{1, 1, 1}, ops::ConvGeometry{2, 0, 1},
                 ops::ConvGeometry{1, 2, 2}, ops::ConvGeometry{4, 0, 1}}) {
    const int k = g.stride == 4 ? 4 : (g.stride == 2 ? 2 : 3);
    auto x = random_tensor<double>(Shape{2, 3, 8, 8}, 1);
    auto w = random_tensor<double>(Shape{5, 3, k, k}, 2);
    Tape<double> tape(false);
    auto y = ops::conv2d(tape, tape.constant(x), tape.constant(w), Var<double>(), g);
    auto want = naive_conv(x, w, g);
    REQUIRE(y->value.shape() == want.shape());
    CHECK(dualtrace::testing::max_abs_diff<double>(y->value.values(), want.values()) <= 1e-12);
  }
}

TEST_CASE("conv2d gradients") {
  auto x = leaf(Shape{2, 3, 6, 6}, 3);
  auto w3 = leaf(Shape{4, 3, 3, 3}, 4);
  auto w1 = leaf(Shape{4, 3, 1, 1}, 5);
  auto w2 = leaf(Shape{4, 3, 2, 2}, 6);
  auto b = leaf(Shape{1, 4, 1, 1}, 7);
  auto ro6 = random_tensor<double>(Shape{2, 4, 6, 6}, 8);
  auto ro3 = random_tensor<double>(Shape{2, 4, 3, 3}, 9);
  expect_grad_ok(grad_check({{"x", x}, {"w", w3}, {"b", b}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::conv2d(t, x, w3, b, {1, 2, 2}), ro6);
  }));
  expect_grad_ok(grad_check({{"x", x}, {"w", w1}, {"b", b}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::conv2d(t, x, w1, b), ro6);
  }));
  expect_grad_ok(grad_check({{"x", x}, {"w", w2}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::conv2d(t, x, w2, Var<double>(), {2, 0, 1}), ro3);
  }));
}

TEST_CASE("depthwise and normalization gradients") {
  auto x = leaf(Shape{2, 4, 5, 5}, 10);
  auto dw = leaf(Shape{4, 1, 3, 3}, 11);
  auto db = leaf(Shape{1, 4, 1, 1}, 12);
  auto gamma = leaf(Shape{1, 4, 1, 1}, 13, 0.5, 1.5);
  auto beta = leaf(Shape{1, 4, 1, 1}, 14);
  auto ro = random_tensor<double>(Shape{2, 4, 5, 5}, 15);
  expect_grad_ok(grad_check({{"x", x}, {"w", dw}, {"b", db}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::depthwise_conv2d(t, x, dw, db, 2, 2), ro);
  }));
  expect_grad_ok(grad_check({{"x", x}, {"gamma", gamma}, {"beta", beta}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::layer_norm_channels(t, x, gamma, beta), ro);
  }));
  Tensor<double> mean(Shape{1, 4, 1, 1}, 0.0), var(Shape{1, 4, 1, 1}, 1.0);
  expect_grad_ok(grad_check({{"x", x}, {"gamma", gamma}, {"beta", beta}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::batch_norm(t, x, gamma, beta, mean, var, true), ro);
  }));
  expect_grad_ok(grad_check({{"x", x}, {"gamma", gamma}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::batch_norm(t, x, gamma, beta, mean, var, false), ro);
  }));
}

TEST_CASE("elementwise and structural gradients") {
  auto a = leaf(Shape{2, 3, 4, 4}, 20);
  auto b = leaf(Shape{2, 3, 4, 4}, 21);
  auto c = leaf(Shape{2, 3, 1, 1}, 22);
  auto d = leaf(Shape{2, 2, 4, 4}, 23);
  auto ro = random_tensor<double>(Shape{2, 3, 4, 4}, 24);
  auto ro5 = random_tensor<double>(Shape{2, 5, 4, 4}, 25);
  auto ro_up = random_tensor<double>(Shape{2, 3, 8, 12}, 26);
  auto ro_pool = random_tensor<double>(Shape{2, 3, 1, 1}, 27);
  expect_grad_ok(grad_check({{"a", a}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::gelu(t, a), ro);
  }));
  expect_grad_ok(grad_check({{"a", a}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::relu(t, a), ro);
  }));
  expect_grad_ok(grad_check({{"a", a}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::sigmoid(t, a), ro);
  }));
  expect_grad_ok(grad_check({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::mul(t, ops::add(t, a, b), a), ro);
  }));
  expect_grad_ok(grad_check({{"a", a}, {"c", c}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::scale(t, ops::add_channel_broadcast(t, a, c), 1.5), ro);
  }));
  expect_grad_ok(grad_check({{"a", a}, {"d", d}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::concat_channels(t, {a, d}), ro5);
  }));
  expect_grad_ok(grad_check({{"a", a}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::upsample_bilinear(t, a, 8, 12), ro_up);
  }));
  expect_grad_ok(grad_check({{"a", a}}, [&](Tape<double>& t) {
    return ops::weighted_sum(t, ops::global_avg_pool(t, a), ro_pool);
  }));
}

TEST_CASE("bilinear upsampling uses half-pixel centres") {
  Tensor<double> x(Shape{1, 1, 1, 2}, std::vector<double>{0.0, 1.0});
  auto y = ops::resize_bilinear(x, 1, 4);
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(0.25));
  CHECK(y[2] == doctest::Approx(0.75));
  CHECK(y[3] == doctest::Approx(1.0));
  auto same = ops::resize_bilinear(random_tensor<double>(Shape{1, 2, 5, 5}, 3), 5, 5);
  CHECK(same == ops::resize_bilinear(same, 5, 5));
}

TEST_CASE("shape validation") {
  Tape<double> tape(false);
  auto a = tape.constant(Tensor<double>(Shape{1, 2, 4, 4}));
  auto b = tape.constant(Tensor<double>(Shape{1, 3, 4, 4}));
  CHECK_THROWS_AS(ops::add(tape, a, b), Error);
  auto w = tape.constant(Tensor<double>(Shape{2, 3, 3, 3}));
  CHECK_THROWS_AS(ops::conv2d(tape, a, w, Var<double>()), Error);
}

TEST_CASE("float and double graphs agree across kernel variants") {
  for (auto isa : {kernels::Isa::Scalar, kernels::Isa::Avx2, kernels::Isa::Avx512}) {
    if (!kernels::isa_supported(isa)) continue;
    kernels::ScopedIsa scope(isa);
    auto xd = random_tensor<double>(Shape{2, 8, 8, 8}, 40);
    auto wd = random_tensor<double>(Shape{16, 8, 3, 3}, 41, -0.3, 0.3);
    auto dwd = random_tensor<double>(Shape{16, 1, 7, 7}, 42, -0.2, 0.2);
    Tape<double> td(false);
    Tape<float> tf(false);
    auto yd = ops::gelu(td, ops::depthwise_conv2d(
                                td, ops::conv2d(td, td.constant(xd), td.constant(wd), Var<double>(),
                                                {1, 1, 1}),
                                td.constant(dwd), Var<double>(), 3));
    auto yf = ops::gelu(tf, ops::depthwise_conv2d(
                                tf, ops::conv2d(tf, tf.constant(xd.cast<float>()),
                                                tf.constant(wd.cast<float>()), Var<float>(),
                                                {1, 1, 1}),
                                tf.constant(dwd.cast<float>()), Var<float>(), 3));
    double worst = 0.0;
    for (std::size_t i = 0; i < yd->value.size(); ++i)
      worst = std::max(worst, std::abs(yd->value[i] - static_cast<double>(yf->value[i])));
    INFO(kernels::isa_name(isa));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("parameter store") {
  nn::ParamStore<float> store;
  nn::Initializer init(1);
  nn::Conv2d<float> conv(store, "conv", 3, 4, 3, {1, 1, 1}, true, init);
  nn::BatchNorm2d<float> bn(store, "bn", 4);
  CHECK(store.parameter_count() == 4 * 3 * 9 + 4 + 8);
  CHECK(store.entries().size() == 6);
  CHECK(store.find("bn.running_var") != nullptr);
  CHECK(store.find("missing") == nullptr);
  CHECK_THROWS_AS(nn::Conv2d<float>(store, "conv", 3, 4, 3, {}, true, init), Error);

  nn::ParamStore<double> sd;
  nn::Initializer i1(9), i2(9);
  nn::ParamStore<float> sf;
  nn::Conv2d<double> cd(sd, "c", 2, 2, 3, {}, true, i1);
  nn::Conv2d<float> cf(sf, "c", 2, 2, 3, {}, true, i2);
  CHECK(cd.weight()->value.cast<float>() == cf.weight()->value);
}

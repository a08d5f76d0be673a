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

#include <algorithm>
#include <cmath>
#include <random>

#include "dualtrace/metrics.hpp"
#include "test_main.hpp"

using namespace dualtrace;
using namespace dualtrace::metrics;

namespace {

double brute_force_auc(const std::vector<float>& s, const std::vector<float>& l) {
  double credit = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] < 0.5f) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] >= 0.5f) continue;
      pairs += 1.0;
      credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return credit / pairs;
}

struct Sample {
  std::vector<float> scores;
  std::vector<float> labels;
};

// Scores correlated with labels, optionally quantized to force ties.
Sample make_sample(std::size_t n, std::uint64_t seed, int levels = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    const float label = u(rng) < 0.3f ? 1.f : 0.f;
    float score = std::clamp(0.35f * label + 0.65f * u(rng), 0.f, 1.f);
    if (levels > 0) score = std::round(score * levels) / levels;
    s.scores.push_back(score);
    s.labels.push_back(label);
  }
  return s;
}

Tensor<float> row(std::vector<float> v) {
  const int n = static_cast<int>(v.size());
  return Tensor<float>(Shape{1, 1, 1, n}, std::move(v));
}

}  // namespace

TEST_CASE("F1 and IoU examples") {
  auto gt = row({1, 1, 0, 0});
  CHECK(pixel_f1(gt, gt) == 1.0);
  CHECK(iou(gt, gt) == 1.0);
  CHECK(pixel_f1(row({0, 0, 1, 1}), gt) == 0.0);
  CHECK(iou(row({0, 0, 1, 1}), gt) == 0.0);
  const auto c = confusion(row({1, 0, 1, 0}).values(), gt.values(), 0.5);
  CHECK(c == ConfusionCounts{1, 1, 1, 1});
  CHECK(pixel_f1(row({1, 0, 1, 0}), gt) == 0.5);
  CHECK(iou(row({1, 0, 1, 0}), gt) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("F1 is undefined without positives") {
  auto empty = row({0, 0, 0, 0});
  try {
    pixel_f1(empty, empty);
    FAIL("expected NoPositives");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoPositives);
  }
  CHECK_THROWS_AS(iou(empty, empty), Error);
}

TEST_CASE("F1 and IoU satisfy F1 = 2 IoU / (1 + IoU)") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = make_sample(500, seed);
    const auto c = confusion(s.scores, s.labels, 0.5);
    const double j = iou_score(c);
    CHECK(std::abs(f1_score(c) - 2.0 * j / (1.0 + j)) <= 1e-9);
  }
}

TEST_CASE("AUC examples") {
  std::vector<float> labels{0, 0, 1, 1};
  std::vector<float> good{0.1f, 0.2f, 0.8f, 0.9f};
  std::vector<float> bad{0.8f, 0.9f, 0.1f, 0.2f};
  std::vector<float> mixed{0.1f, 0.4f, 0.35f, 0.8f};
  CHECK(auc_exact(good, labels) == 1.0);
  CHECK(auc_exact(bad, labels) == 0.0);
  CHECK(auc_exact(mixed, labels) == 0.75);
  CHECK(brute_force_auc(mixed, labels) == 0.75);
  std::vector<float> flat{0.5f, 0.5f, 0.5f, 0.5f};
  CHECK(auc_exact(flat, labels) == 0.5);
  std::vector<float> one_class{1, 1, 1, 1};
  try {
    auc_exact(good, one_class);
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateLabels);
  }
}

TEST_CASE("exact AUC equals brute-force pair counting") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % (trial < 30 ? 400 : 10000);
    auto s = make_sample(n, 500 + trial, trial % 3 == 0 ? 20 : 0);
    if (std::count(s.labels.begin(), s.labels.end(), 1.f) == 0) s.labels[0] = 1.f;
    if (std::count(s.labels.begin(), s.labels.end(), 0.f) == 0) s.labels[1] = 0.f;
    const double want = brute_force_auc(s.scores, s.labels);
    CHECK(auc_exact(s.scores, s.labels) == doctest::Approx(want).epsilon(1e-12));
    RocAccumulator exact(RocAccumulator::kDefaultBins, true);
    exact.add(s.scores, s.labels);
    CHECK(exact.auc() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("streaming AUC converges as bins grow") {
  auto s = make_sample(20000, 3);
  const double exact = auc_exact(s.scores, s.labels);
  double prev = 1.0;
  for (int bins : {16, 256, 4096}) {
    RocAccumulator acc(bins);
    acc.add(s.scores, s.labels);
    const double err = std::abs(acc.auc() - exact);
    CHECK(err <= prev);
    prev = err;
    if (bins == 4096) CHECK(err <= 1e-3);
  }
}

TEST_CASE("accumulators merge and ignore pixel order") {
  auto s = make_sample(3000, 9);
  RocAccumulator whole, a, b;
  whole.add(s.scores, s.labels);
  a.add(std::span(s.scores).subspan(0, 1000), std::span(s.labels).subspan(0, 1000));
  b.add(std::span(s.scores).subspan(1000), std::span(s.labels).subspan(1000));
  a.merge(b);
  CHECK(a.auc() == whole.auc());

  std::vector<std::size_t> idx(s.scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(4));
  Sample p;
  for (auto i : idx) {
    p.scores.push_back(s.scores[i]);
    p.labels.push_back(s.labels[i]);
  }
  CHECK(auc_exact(p.scores, p.labels) == auc_exact(s.scores, s.labels));
  CHECK(confusion(p.scores, p.labels) == confusion(s.scores, s.labels));
  RocAccumulator mismatched(16);
  CHECK_THROWS_AS(whole.merge(mismatched), Error);
}

TEST_CASE("evaluator reports pooled and per-image metrics") {
  Evaluator ev("synthetic", 0.5, RocAccumulator::kDefaultBins, true);
  std::vector<float> gt1{1, 1, 0, 0}, p1{0.9f, 0.2f, 0.7f, 0.1f};
  std::vector<float> gt2{0, 0, 0, 1}, p2{0.1f, 0.1f, 0.2f, 0.8f};
  ev.add_image(p1, gt1);
  ev.add_image(p2, gt2);
  const auto r = ev.report();
  CHECK(r.images == 2);
  CHECK(r.pixels == 8);
  CHECK(r.positive_pixels == 3);
  CHECK(r.counts == ConfusionCounts{2, 1, 4, 1});
  CHECK(*r.f1 == doctest::Approx(4.0 / 6.0));
  CHECK(*r.macro_f1 == doctest::Approx((0.5 + 1.0) / 2.0));
  CHECK(r.status == "ok");
  const auto json = r.to_json();
  CHECK(json.find("\"dataset\":\"synthetic\"") != std::string::npos);

  Evaluator empty("none");
  std::vector<float> z{0, 0};
  empty.add_image(z, z);
  const auto e = empty.report();
  CHECK(!e.f1.has_value());
  CHECK(!e.auc.has_value());
  CHECK(e.status == "no_positives,degenerate_labels");
}

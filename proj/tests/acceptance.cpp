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

// Acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualtrace/attention.hpp"
#include "dualtrace/checkpoint.hpp"
#include "dualtrace/evaluate.hpp"
#include "dualtrace/filters.hpp"
#include "dualtrace/losses.hpp"
#include "dualtrace/metrics.hpp"
#include "dualtrace/synth.hpp"
#include "dualtrace/train.hpp"
#include "gradcheck.hpp"
#include "test_main.hpp"

using namespace dualtrace;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------- oracles

// out(y, x) = sum_ij k(i, j) * in(y + i - p, x + j - p), zero outside.
std::vector<double> hand_correlate(const std::vector<double>& img, int h, int w,
                                   const std::vector<double>& k, int ksize) {
  const int p = ksize / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < ksize; ++i)
        for (int j = 0; j < ksize; ++j) {
          const int yy = y + i - p, xx = x + j - p;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) acc += k[i * ksize + j] * img[yy * w + xx];
        }
      out[y * w + x] = acc;
    }
  return out;
}

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

Tensor<double> row(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor<double>(Shape{1, 1, 1, n}, std::move(v));
}

Tensor<double> binary_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> t(s);
  for (auto& v : t.values()) v = static_cast<double>(rng() & 1u);
  return t;
}

testing::Leaves trainable(const nn::ParamStore<double>& store) {
  testing::Leaves out;
  for (const auto& e : store.entries())
    if (e.trainable) out.emplace_back(e.name, e.var);
  return out;
}

model::ModelConfig tiny_model() {
  model::ModelConfig m;
  m.backbone.stage_dims = {8, 16, 24, 32};
  m.backbone.stage_depths = {1, 1, 1, 1};
  m.decoder_dims = {24, 16, 8};
  return m;
}

engine::RunConfig tiny_run(const fs::path& out) {
  engine::RunConfig c;
  c.model = tiny_model();
  c.batch_size = 4;
  c.epochs = 2;
  c.input_size = 64;
  c.optimizer.lr0 = 1e-3;
  c.seed = 11;
  c.output_dir = out.string();
  return c;
}

const data::Manifest& tiny_manifest(const fs::path& work) {
  static const data::Manifest m = [&] {
    synth::SynthConfig s;
    s.size = 64;
    s.splice = 22;
    s.copy_move = 21;
    s.removal = 21;
    s.holdout_fraction = 0.0;
    return synth::generate_synthetic(s, work / "tiny_data");
  }();
  return m;
}

// ------------------------------------------------------------- criteria

Outcome constrained_kernel_suite(const fs::path& work) {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  double worst_center = 0, worst_sum = 0, worst_idem = 0;
  int kernels = 0;
  while (kernels < 1000) {
    const int ksize = kernels % 2 ? 3 : 5;
    std::vector<float> raw(std::size_t(ksize) * ksize);
    for (auto& v : raw) v = dist(rng);
    const int c = (ksize / 2) * ksize + ksize / 2;
    double s = 0;
    for (int i = 0; i < ksize * ksize; ++i)
      if (i != c) s += raw[i];
    if (std::abs(s) < 1e-3) continue;  // near-degenerate draws are redrawn by the layer
    auto p = filters::project_constrained_kernel(
        filters::ConstrainedKernel<float>{Tensor<float>(Shape{1, 1, ksize, ksize}, raw)});
    auto q = filters::project_constrained_kernel(p);
    double sum = 0;
    for (int i = 0; i < ksize * ksize; ++i)
      if (i != c) sum += p.weights[i];
    worst_center = std::max(worst_center, std::abs(double(p.weights[c]) + 1.0));
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    for (int i = 0; i < ksize * ksize; ++i)
      worst_idem = std::max(worst_idem, std::abs(double(q.weights[i]) - p.weights[i]));
    ++kernels;
  }
  o.expect(worst_center <= 1e-6, "centre == -1");
  o.expect(worst_sum <= 1e-6, "non-centre sum == 1");
  o.expect(worst_idem <= 1e-6, "idempotence");
  o.note("1000 kernels: |c+1| " + num(worst_center, 3) + ", |sum-1| " + num(worst_sum, 3) +
         ", |P(P(k))-P(k)| " + num(worst_idem, 3));

  auto cfg = tiny_run(work / "c1_run");
  fs::remove_all(cfg.output_dir);
  cfg.epochs = 13;
  cfg.max_steps = 200;
  double run_worst = 0;
  int verified = 0;
  engine::TrainHooks hooks;
  hooks.on_step = [&](const engine::StepRecord&, const model::DualBranchModel<float>& net) {
    const auto r = net.verify_constraints();
    run_worst = std::max({run_worst, r.max_center_error, r.max_sum_error});
    ++verified;
  };
  data::Dataset ds(tiny_manifest(work).records, 64);
  engine::train(cfg, ds, nullptr, hooks);
  o.expect(verified == 200 && run_worst <= 1e-6, "invariants after every optimizer step");
  o.note("200-step run: verified " + std::to_string(verified) + " steps, worst " +
         num(run_worst, 3));
  const double t = seconds_since(t0);
  o.expect(t < 60.0, "runtime < 1 min");
  o.note("runtime " + num(t, 3) + " s");
  return o;
}

Outcome filter_oracles() {
  Outcome o;
  nn::Initializer init(3);
  // Constant inputs, interior pixels (zero padding breaks the neighbourhood at borders).
  auto bayar = filters::project_constrained_kernel(
      filters::ConstrainedKernel<float>{init.uniform<float>(Shape{3, 3, 5, 5}, 1.0)});
  Tensor<float> flat(Shape{1, 3, 16, 16}, 0.43f);
  auto interior_max = [](const Tensor<float>& t, int border) {
    double m = 0;
    const auto s = t.shape();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = border; y < s.h - border; ++y)
          for (int x = border; x < s.w - border; ++x)
            m = std::max(m, std::abs(double(t(n, c, y, x))));
    return m;
  };
  const double b_const = interior_max(filters::bayar_forward(flat, bayar), 2);
  const double s_const = interior_max(filters::srm_forward(flat, filters::SrmBank::standard()), 2);
  const auto sob = filters::sobel_gradients(flat);
  const double sob_const = std::max(
      {interior_max(sob.gx, 1), interior_max(sob.gy, 1), interior_max(sob.magnitude, 1)});
  o.expect(b_const <= 1e-5, "Bayar constant annihilation");
  o.expect(s_const <= 1e-5, "SRM constant annihilation");
  o.expect(sob_const <= 1e-5, "Sobel constant annihilation");
  o.note("constant input: Bayar " + num(b_const, 3) + ", SRM " + num(s_const, 3) + ", Sobel " +
         num(sob_const, 3));

  // Impulse responses on 9 x 9 images against scalar hand correlation.
  std::vector<double> impulse(81, 0.0);
  impulse[4 * 9 + 4] = 1.0;
  double worst = 0;
  auto compare = [&](const Tensor<double>& out, int channel, const std::vector<double>& want) {
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x)
        worst = std::max(worst, std::abs(out(0, channel, y, x) - want[y * 9 + x]));
  };
  auto bk = filters::project_constrained_kernel(
      filters::ConstrainedKernel<double>{init.uniform<double>(Shape{2, 1, 5, 5}, 1.0)});
  const auto bout = filters::bayar_forward(Tensor<double>(Shape{1, 1, 9, 9}, impulse), bk);
  for (int k = 0; k < 2; ++k) {
    std::vector<double> taps(bk.weights.data() + k * 25, bk.weights.data() + (k + 1) * 25);
    compare(bout, k, hand_correlate(impulse, 9, 9, taps, 5));
  }

  auto bank = filters::SrmBank::standard();
  bank.threshold = 1e9;
  bank.input_scale = 1.0;
  Tensor<double> rgb(Shape{1, 3, 9, 9});
  for (int c = 0; c < 3; ++c) std::copy(impulse.begin(), impulse.end(), rgb.plane(0, c));
  const auto sout = filters::srm_forward(rgb, bank);
  for (int f = 0; f < bank.out_channels(); ++f) {
    const auto& flt = bank.filters[f];
    std::vector<double> taps(flt.taps.size());
    for (std::size_t i = 0; i < taps.size(); ++i) taps[i] = flt.taps[i] / flt.divisor;
    compare(sout, f, hand_correlate(impulse, 9, 9, taps, flt.ksize));
  }

  const auto sp = filters::SobelPair::standard();
  const auto sobel = filters::sobel_gradients(Tensor<double>(Shape{1, 1, 9, 9}, impulse));
  compare(sobel.gx, 0, hand_correlate(impulse, 9, 9, {sp.gx.begin(), sp.gx.end()}, 3));
  compare(sobel.gy, 0, hand_correlate(impulse, 9, 9, {sp.gy.begin(), sp.gy.end()}, 3));
  o.expect(worst <= 1e-6, "impulse responses");
  o.note("impulse responses (Bayar x2, SRM x" + std::to_string(bank.out_channels()) +
         ", Sobel gx/gy) max error " + num(worst, 3));
  return o;
}

Outcome loss_oracles() {
  Outcome o;
  double worst_focal = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = testing::random_tensor<double>(Shape{2, 1, 8, 8}, 1000 + seed, 0.0, 1.0);
    auto g = binary_tensor(p.shape(), 2000 + seed);
    worst_focal = std::max(worst_focal, std::abs(losses::focal_loss(p, g, 0.5, 0.0) -
                                                 0.5 * losses::bce_loss(p, g)));
  }
  o.expect(worst_focal <= 1e-9, "focal(gamma 0, alpha 0.5) == BCE / 2");
  o.note("focal/BCE identity on 100 batches: " + num(worst_focal, 3));

  const double bce_half = losses::bce_loss(row({0.5}), row({1.0}));
  const double focal_single = losses::focal_loss(row({0.9}), row({1.0}), 0.25, 2.0);
  std::vector<double> half(16, 0.0);
  for (int i = 0; i < 8; ++i) half[i] = 1.0;
  const double dice = losses::dice_edge_loss(row(half), row(std::vector<double>(16, 1.0)), 0.0);
  o.expect(std::abs(bce_half - 0.693147) <= 1e-6, "BCE(0.5) = 0.693147");
  o.expect(std::abs(focal_single - 2.6341e-4) <= 1e-6, "focal single pixel = 2.6341e-4");
  o.expect(std::abs(dice - 1.0 / 3.0) <= 1e-6, "Dice half overlap = 1/3");
  o.note("BCE " + num(bce_half, 8) + ", focal " + num(focal_single, 6) + ", Dice " + num(dice, 8));

  double worst_sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ml = make_leaf(testing::random_tensor<double>(Shape{2, 1, 8, 8}, 30 + seed, -3.0, 3.0), true);
    auto el = make_leaf(testing::random_tensor<double>(Shape{2, 1, 8, 8}, 60 + seed, -3.0, 3.0), true);
    Tape<double> tape(true);
    const auto r = losses::combined_loss(tape, ml, el, binary_tensor(ml->value.shape(), 90 + seed),
                                         binary_tensor(ml->value.shape(), 120 + seed),
                                         losses::LossConfig{}, true);
    worst_sum = std::max({worst_sum, std::abs(r.total_value - (r.bce + r.focal + r.edge)),
                          std::abs(r.total->value[0] - r.total_value)});
  }
  o.expect(worst_sum <= 1e-9, "total == bce + focal + edge");
  o.note("additivity on 20 batches: " + num(worst_sum, 3));
  return o;
}

Outcome gradient_checks() {
  Outcome o;
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, testing::GradCheckResult>> results;

  {
    nn::ParamStore<double> store;
    nn::Initializer init(8);
    filters::ConstrainedConv<double> conv(store, "bayar", 2, 3, 5, init);
    auto x = make_leaf(testing::random_tensor<double>(Shape{1, 2, 6, 6}, 4), true);
    auto ro = testing::random_tensor<double>(Shape{1, 3, 6, 6}, 5);
    results.emplace_back("constrained conv", testing::grad_check({{"weight", conv.weight()}, {"x", x}}, [&](Tape<double>& t) {
      return ops::weighted_sum(t, conv(t, x), ro);
    }));
  }
  {
    nn::ParamStore<double> store;
    nn::Initializer init(6);
    attention::FeatureEnhance<double> fe(store, "fe", 8, {}, init);
    auto f = make_leaf(testing::random_tensor<double>(Shape{2, 8, 6, 6}, 7), true);
    auto ro = testing::random_tensor<double>(Shape{2, 8, 6, 6}, 8);
    auto leaves = trainable(store);
    leaves.emplace_back("F", f);
    results.emplace_back("feature enhancement", testing::grad_check(leaves, [&](Tape<double>& t) {
      return ops::weighted_sum(t, fe(t, f, true), ro);
    }));
  }
  {
    nn::ParamStore<double> store;
    nn::Initializer init(14);
    attention::EdgeExtract<double> eeb(store, "eeb", 8, init);
    auto f = make_leaf(testing::random_tensor<double>(Shape{1, 8, 4, 4}, 15), true);
    auto ro = testing::random_tensor<double>(Shape{1, 1, 4, 4}, 16);
    auto leaves = trainable(store);
    leaves.emplace_back("f", f);
    results.emplace_back("edge extraction", testing::grad_check(leaves, [&](Tape<double>& t) {
      return ops::weighted_sum(t, eeb(t, f, true).edge_logit, ro);
    }));
  }
  {
    auto x = make_leaf(testing::random_tensor<double>(Shape{1, 1, 4, 4}, 9, -3.0, 3.0), true);
    auto e = make_leaf(testing::random_tensor<double>(Shape{1, 1, 4, 4}, 19, -3.0, 3.0), true);
    auto g = binary_tensor(x->value.shape(), 10);
    auto ge = binary_tensor(x->value.shape(), 11);
    results.emplace_back("bce loss", testing::grad_check({{"x", x}}, [&](Tape<double>& t) {
      return losses::bce_with_logits(t, x, g);
    }));
    results.emplace_back("focal loss", testing::grad_check({{"x", x}}, [&](Tape<double>& t) {
      return losses::focal_with_logits(t, x, g, 0.25, 2.0);
    }));
    results.emplace_back("dice loss", testing::grad_check({{"x", x}}, [&](Tape<double>& t) {
      return losses::dice_with_logits(t, x, g, 1.0);
    }));
    results.emplace_back("combined loss", testing::grad_check({{"mask", x}, {"edge", e}}, [&](Tape<double>& t) {
      return losses::combined_loss(t, x, e, g, ge, losses::LossConfig{}, true).total;
    }));
  }
  for (const auto& [name, r] : results) {
    o.expect(r.max_rel_error <= 1e-3, name + " (" + r.worst + ")");
    o.note(name + " " + num(r.max_rel_error, 3) + " over " + std::to_string(r.checked));
  }
  const double t = seconds_since(t0);
  o.expect(t < 300.0, "runtime < 5 min");
  o.note("runtime " + num(t, 3) + " s");
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  double worst_auc = 0, worst_identity = 0, worst_stream = 0;
  int batches = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = trial < 40 ? 2 + rng() % 2000 : 10000;
    const int levels = trial % 3 == 0 ? 16 : 0;  // quantized scores force ties
    std::vector<float> s(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = u(rng) < 0.3f ? 1.f : 0.f;
      float v = std::clamp(0.3f * l[i] + 0.7f * u(rng), 0.f, 1.f);
      if (levels) v = std::round(v * levels) / levels;
      s[i] = v;
    }
    l[0] = 1.f;
    l[n - 1] = 0.f;
    worst_auc = std::max(worst_auc, std::abs(metrics::auc_exact(s, l) - brute_force_auc(s, l)));
    const auto c = metrics::confusion(s, l, 0.5);
    if (c.tp + c.fp + c.fn > 0) {
      const double j = metrics::iou_score(c);
      worst_identity = std::max(worst_identity, std::abs(metrics::f1_score(c) - 2 * j / (1 + j)));
      ++batches;
    }
    if (n == 10000) {
      metrics::RocAccumulator acc(4096);
      acc.add(s, l);
      worst_stream = std::max(worst_stream, std::abs(acc.auc() - metrics::auc_exact(s, l)));
    }
  }
  o.expect(worst_auc <= 1e-12, "exact AUC == brute force");
  o.expect(worst_identity <= 1e-9, "F1 = 2 IoU / (1 + IoU)");
  o.expect(worst_stream <= 1e-3, "streaming AUC within 1e-3 at B = 4096");
  o.note("60 inputs <= 1e4 px: |AUC - brute| " + num(worst_auc, 3) + ", identity over " +
         std::to_string(batches) + " batches " + num(worst_identity, 3) + ", streaming " +
         num(worst_stream, 3));
  return o;
}

constexpr double kBenchLr = 3e-4;

struct BenchRun {
  double auc = 0;
  double f1 = 0;
  double iou = 0;
  double seconds = 0;
};

BenchRun bench_run(const fs::path& work, const data::Dataset& train_set,
                   const data::Dataset& test_set, model::AblationFlags flags, std::uint64_t seed,
                   const std::string& tag) {
  engine::RunConfig cfg;  // 256 px, batch 4, 30 epochs, flips / quarter turns
  // 30 short epochs instead of 150 + 50 long ones: a larger initial rate,
  // same decay rule.
  cfg.optimizer.lr0 = kBenchLr;
  cfg.model.ablation = flags;
  cfg.seed = seed;
  cfg.output_dir = (work / ("bench_" + tag + "_seed" + std::to_string(seed))).string();
  fs::remove_all(cfg.output_dir);
  const auto t0 = Clock::now();
  engine::TrainHooks hooks;
  hooks.on_epoch = [&](const engine::EpochRecord& e) {
    std::fprintf(stderr, "  [%s seed %llu] epoch %d mean loss %.5f (%.0f s)\n", tag.c_str(),
                 static_cast<unsigned long long>(seed), e.epoch, e.mean_loss, seconds_since(t0));
  };
  auto result = engine::train(cfg, train_set, nullptr, hooks);
  engine::EvalOptions opts;
  opts.exact_auc = true;
  const auto r = engine::evaluate(engine::model_predictor(*result.model), test_set, opts).pooled;
  BenchRun out;
  out.auc = r.auc.value_or(std::nan(""));
  out.f1 = r.f1.value_or(std::nan(""));
  out.iou = r.iou.value_or(std::nan(""));
  out.seconds = seconds_since(t0);
  std::fprintf(stderr, "  [%s seed %llu] held-out AUC %.4f F1 %.4f IoU %.4f (%.0f s)\n",
               tag.c_str(), static_cast<unsigned long long>(seed), out.auc, out.f1, out.iou,
               out.seconds);
  return out;
}

struct Bench {
  data::Dataset train_set;
  data::Dataset test_set;
  std::map<std::string, std::vector<BenchRun>> runs;
};

Bench& bench(const fs::path& work) {
  static Bench b = [&] {
    synth::SynthConfig s;  // 256 samples, 256 px, splice / copy-move / removal
    s.seed = 42;
    const auto m = synth::generate_synthetic(s, work / "bench_data");
    Bench out{data::Dataset(m.select(data::Split::Train)), data::Dataset(m.select(data::Split::Test)),
              {}};
    return out;
  }();
  return b;
}

constexpr std::uint64_t kBenchSeeds[3] = {42, 43, 44};

const std::vector<BenchRun>& bench_runs(const fs::path& work, const std::string& tag,
                                        model::AblationFlags flags, int count) {
  auto& b = bench(work);
  auto& runs = b.runs[tag];
  while (static_cast<int>(runs.size()) < count)
    runs.push_back(bench_run(work, b.train_set, b.test_set, flags, kBenchSeeds[runs.size()], tag));
  return runs;
}

Outcome end_to_end(const fs::path& work) {
  Outcome o;
  auto& b = bench(work);
  o.note("train " + std::to_string(b.train_set.size()) + " / held-out " +
         std::to_string(b.test_set.size()));
  o.expect(b.train_set.size() == 192 && b.test_set.size() == 64, "192 / 64 split");
  const auto& r = bench_runs(work, "full", model::AblationFlags::full(), 1).front();
  o.expect(r.auc >= 0.95, "pixel AUC >= 0.95");
  o.expect(r.f1 >= 0.70, "pixel F1 >= 0.70");
  o.note("lr0 " + num(kBenchLr, 3) + ", training seed 42");
  o.note("held-out pixel AUC " + num(r.auc, 4) + ", F1 " + num(r.f1, 4) + ", IoU " +
         num(r.iou, 4) + "; training + evaluation " + num(r.seconds / 60.0, 3) + " min");
  return o;
}

Outcome ablation_order(const fs::path& work) {
  Outcome o;
  auto mean_auc = [](const std::vector<BenchRun>& runs) {
    double s = 0;
    for (const auto& r : runs) s += r.auc;
    return s / runs.size();
  };
  const auto& full = bench_runs(work, "full", model::AblationFlags::full(), 3);
  const auto& a = bench_runs(work, "case_a", model::AblationFlags::case_a(), 3);
  const auto& c = bench_runs(work, "case_c", model::AblationFlags::case_c(), 3);
  const double mf = mean_auc(full), ma = mean_auc(a), mc = mean_auc(c);
  auto list = [](const std::vector<BenchRun>& runs) {
    std::string s;
    for (const auto& r : runs) s += (s.empty() ? "" : ", ") + num(r.auc, 4);
    return s;
  };
  o.expect(ma < mf, "case A mean AUC < full");
  o.expect(mc < mf, "case C mean AUC < full");
  o.note("mean held-out AUC over seeds 42-44: full " + num(mf, 4) + " [" + list(full) +
         "], A (no edge loss) " + num(ma, 4) + " [" + list(a) + "], C (no noise branch) " +
         num(mc, 4) + " [" + list(c) + "]");
  return o;
}

Outcome reproducibility(const fs::path& work) {
  Outcome o;
  data::Dataset ds(tiny_manifest(work).records, 64);
  const auto a = work / "c8_a", b = work / "c8_b";
  fs::remove_all(a);
  fs::remove_all(b);
  auto ca = tiny_run(a), cb = tiny_run(b);
  ca.checkpoint_every = cb.checkpoint_every = 1;
  const auto ra = engine::train(ca, ds);
  const auto rb = engine::train(cb, ds);
  o.expect(ra.log == rb.log, "identical TrainLog");
  o.expect(slurp(a / "train_log.jsonl") == slurp(b / "train_log.jsonl"), "identical log files");
  bool ckpts = true;
  for (const char* name : {"epoch_0001.ckpt", "epoch_0002.ckpt", "final.ckpt"})
    ckpts = ckpts && slurp(a / name) == slurp(b / name) && !slurp(a / name).empty();
  o.expect(ckpts, "byte-identical checkpoints");
  auto loaded = engine::load_checkpoint(a / "final.ckpt");
  engine::save_checkpoint(a / "resaved.ckpt", *loaded.model, loaded.meta);
  o.expect(slurp(a / "final.ckpt") == slurp(a / "resaved.ckpt"), "save/load/save round trip");
  o.note(std::to_string(ra.log.steps.size()) + " steps twice; " +
         std::to_string(fs::file_size(a / "final.ckpt")) + "-byte checkpoints compared");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "dualtrace_acceptance").string();
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for data, runs and checkpoints")
      ->capture_default_str();
  app.add_option("--only", only, "Run only these criteria (1-8)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"constrained-kernel projection", [&] { return constrained_kernel_suite(work); }},
      {"filter oracles", [] { return filter_oracles(); }},
      {"loss oracles", [] { return loss_oracles(); }},
      {"gradient checks", [] { return gradient_checks(); }},
      {"metric oracles", [] { return metric_oracles(); }},
      {"end-to-end synthetic benchmark", [&] { return end_to_end(work); }},
      {"ablation ordering", [&] { return ablation_order(work); }},
      {"reproducibility", [&] { return reproducibility(work); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::printf("[%s] criterion %d: %s (%.1f s) | %s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), seconds_since(t0), detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}

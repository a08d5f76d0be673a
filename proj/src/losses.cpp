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

#include "dualtrace/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dualtrace::losses {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_focal_hyper(double alpha, double gamma) {
  require(alpha >= 0.0 && alpha <= 1.0 && std::isfinite(alpha), Errc::InvalidHyper,
          "focal alpha must lie in [0, 1], got " + std::to_string(alpha));
  require(gamma >= 0.0 && std::isfinite(gamma), Errc::InvalidHyper,
          "focal gamma must be >= 0, got " + std::to_string(gamma));
}

template <typename T>
void check_pair(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  require_shape(b.shape(), a.shape(), what);
  require(!a.empty(), Errc::EmptyInput, std::string(what) + ": empty input");
}

// Per-pixel focal loss and its derivative w.r.t. the logit.
struct FocalTerm {
  double value;
  double dx;
};

FocalTerm focal_term(double x, double y, double alpha, double gamma) {
  const double p = sigmoid(x);
  const double q = 1.0 - p;
  const double sp_neg = softplus(-x);  // -log p
  const double sp_pos = softplus(x);   // -log(1 - p)
  const double qg = std::pow(q, gamma);
  const double pg = std::pow(p, gamma);
  const double value = alpha * y * qg * sp_neg + (1.0 - alpha) * (1.0 - y) * pg * sp_pos;
  const double da = -qg * (gamma * p * sp_neg + q);
  const double db = pg * (gamma * q * sp_pos + p);
  return {value, alpha * y * da + (1.0 - alpha) * (1.0 - y) * db};
}

template <typename T>
Var<T> scalar_output(Tape<T>& tape, double value, const Var<T>& logits, std::vector<double> dx) {
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(value)), {&logits},
                     [logits, dx = std::move(dx)](const Node<T>& out) {
                       const double g = static_cast<double>(out.grad[0]);
                       auto dst = logits->grad_buffer().values();
                       for (std::size_t i = 0; i < dst.size(); ++i)
                         dst[i] += static_cast<T>(g * dx[i]);
                     });
}

}  // namespace

void LossConfig::validate() const {
  require(focal_alpha > 0.0 && focal_alpha < 1.0, Errc::InvalidHyper,
          "focal_alpha must lie in (0, 1)");
  require(focal_gamma >= 0.0, Errc::InvalidHyper, "focal_gamma must be >= 0");
  require(dice_smooth > 0.0, Errc::InvalidHyper, "dice_smooth must be positive");
  require(w_bce >= 0.0 && w_focal >= 0.0 && w_edge >= 0.0, Errc::InvalidHyper,
          "loss weights must be non-negative");
}

template <typename T>
double bce_loss(const Tensor<T>& pred_prob, const Tensor<T>& gt) {
  check_pair(pred_prob, gt, "bce_loss");
  auto p = pred_prob.values();
  auto y = gt.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = clamp_prob(static_cast<double>(p[i]));
    const double yi = static_cast<double>(y[i]);
    sum -= yi * std::log(pi) + (1.0 - yi) * std::log1p(-pi);
  }
  return sum / static_cast<double>(p.size());
}

template <typename T>
double focal_loss(const Tensor<T>& pred_prob, const Tensor<T>& gt, double alpha, double gamma) {
  check_pair(pred_prob, gt, "focal_loss");
  check_focal_hyper(alpha, gamma);
  auto p = pred_prob.values();
  auto y = gt.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = clamp_prob(static_cast<double>(p[i]));
    const double yi = static_cast<double>(y[i]);
    sum -= alpha * std::pow(1.0 - pi, gamma) * yi * std::log(pi) +
           (1.0 - alpha) * std::pow(pi, gamma) * (1.0 - yi) * std::log1p(-pi);
  }
  return sum / static_cast<double>(p.size());
}

template <typename T>
double dice_edge_loss(const Tensor<T>& edge_prob, const Tensor<T>& gt_edge, double smooth) {
  check_pair(edge_prob, gt_edge, "dice_edge_loss");
  require(smooth >= 0.0, Errc::InvalidHyper, "dice smooth must be >= 0");
  auto p = edge_prob.values();
  auto g = gt_edge.values();
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(static_cast<double>(p[i]), 0.0, 1.0);
    const double gi = static_cast<double>(g[i]);
    inter += pi * gi;
    sp += pi;
    sg += gi;
  }
  const double denom = sp + sg + smooth;
  if (denom == 0.0) return 0.0;
  return 1.0 - (2.0 * inter + smooth) / denom;
}

template <typename T>
Var<T> bce_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt) {
  check_pair(logits->value, gt, "bce_with_logits");
  auto x = logits->value.values();
  auto y = gt.values();
  const double inv_n = 1.0 / static_cast<double>(x.size());
  double sum = 0.0;
  std::vector<double> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = static_cast<double>(x[i]);
    const double yi = static_cast<double>(y[i]);
    sum += yi * softplus(-xi) + (1.0 - yi) * softplus(xi);
    dx[i] = (sigmoid(xi) - yi) * inv_n;
  }
  return scalar_output(tape, sum * inv_n, logits, std::move(dx));
}

template <typename T>
Var<T> focal_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt, double alpha,
                         double gamma) {
  check_pair(logits->value, gt, "focal_with_logits");
  check_focal_hyper(alpha, gamma);
  auto x = logits->value.values();
  auto y = gt.values();
  const double inv_n = 1.0 / static_cast<double>(x.size());
  double sum = 0.0;
  std::vector<double> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto t = focal_term(static_cast<double>(x[i]), static_cast<double>(y[i]), alpha, gamma);
    sum += t.value;
    dx[i] = t.dx * inv_n;
  }
  return scalar_output(tape, sum * inv_n, logits, std::move(dx));
}

template <typename T>
Var<T> dice_with_logits(Tape<T>& tape, const Var<T>& logits, const Tensor<T>& gt, double smooth) {
  check_pair(logits->value, gt, "dice_with_logits");
  require(smooth > 0.0, Errc::InvalidHyper, "dice smooth must be positive");
  auto x = logits->value.values();
  auto g = gt.values();
  std::vector<double> p(x.size());
  double inter = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = sigmoid(static_cast<double>(x[i]));
    const double gi = static_cast<double>(g[i]);
    inter += p[i] * gi;
    sp += p[i];
    sg += gi;
  }
  const double denom = sp + sg + smooth;
  const double num = 2.0 * inter + smooth;
  std::vector<double> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dp = -(2.0 * static_cast<double>(g[i]) * denom - num) / (denom * denom);
    dx[i] = dp * p[i] * (1.0 - p[i]);
  }
  return scalar_output(tape, 1.0 - num / denom, logits, std::move(dx));
}

template <typename T>
LossBreakdown<T> combined_loss(Tape<T>& tape, const Var<T>& mask_logit, const Var<T>& edge_logit,
                               const Tensor<T>& gt_mask, const Tensor<T>& gt_edge,
                               const LossConfig& config, bool use_edge_loss) {
  config.validate();
  std::vector<Var<T>> terms;
  std::vector<double> weights;
  LossBreakdown<T> out;

  auto bce = bce_with_logits(tape, mask_logit, gt_mask);
  auto focal = focal_with_logits(tape, mask_logit, gt_mask, config.focal_alpha, config.focal_gamma);
  out.bce = config.w_bce * static_cast<double>(bce->value[0]);
  out.focal = config.w_focal * static_cast<double>(focal->value[0]);
  terms = {bce, focal};
  weights = {config.w_bce, config.w_focal};
  if (use_edge_loss) {
    auto dice = dice_with_logits(tape, edge_logit, gt_edge, config.dice_smooth);
    out.edge = config.w_edge * static_cast<double>(dice->value[0]);
    terms.push_back(dice);
    weights.push_back(config.w_edge);
  }
  out.total_value = out.bce + out.focal + out.edge;
  out.total = tape.record(Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(out.total_value)), terms,
                          [terms, weights](const Node<T>& node) {
                            const T g = node.grad[0];
                            for (std::size_t i = 0; i < terms.size(); ++i)
                              if (terms[i]->requires_grad)
                                terms[i]->grad_buffer()[0] += g * static_cast<T>(weights[i]);
                          });
  return out;
}

#define DUALTRACE_INSTANTIATE_LOSSES(T)                                                         \
  template double bce_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template double focal_loss(const Tensor<T>&, const Tensor<T>&, double, double);              \
  template double dice_edge_loss(const Tensor<T>&, const Tensor<T>&, double);                  \
  template Var<T> bce_with_logits(Tape<T>&, const Var<T>&, const Tensor<T>&);                  \
  template Var<T> focal_with_logits(Tape<T>&, const Var<T>&, const Tensor<T>&, double, double); \
  template Var<T> dice_with_logits(Tape<T>&, const Var<T>&, const Tensor<T>&, double);         \
  template LossBreakdown<T> combined_loss(Tape<T>&, const Var<T>&, const Var<T>&,              \
                                          const Tensor<T>&, const Tensor<T>&, const LossConfig&, \
                                          bool);

DUALTRACE_INSTANTIATE_LOSSES(float)
DUALTRACE_INSTANTIATE_LOSSES(double)

}  // namespace dualtrace::losses

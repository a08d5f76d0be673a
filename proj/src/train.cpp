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

#include "dualtrace/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "dualtrace/checkpoint.hpp"
#include "dualtrace/error.hpp"
#include "dualtrace/evaluate.hpp"
#include "dualtrace/losses.hpp"

namespace dualtrace::engine {

namespace fs = std::filesystem;

double lr_schedule(double lr0, const ScheduleConfig& schedule, std::int64_t index) {
  require(index >= 0, Errc::ConfigError, "lr_schedule: index must be non-negative");
  return lr0 * std::pow(schedule.factor, static_cast<double>(index / schedule.period));
}

void Adam::step(nn::ParamStore<float>& params, double lr) {
  const auto& entries = params.entries();
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.trainable ? Tensor<float>(e.var->value.shape()) : Tensor<float>());
      v_.emplace_back(e.trainable ? Tensor<float>(e.var->value.shape()) : Tensor<float>());
    }
  }
  require(m_.size() == entries.size(), Errc::ShapeMismatch, "Adam: parameter set changed");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const float step = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(config_.eps);
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.trainable || e.var->grad.empty()) continue;
    float* w = e.var->value.data();
    const float* g = e.var->grad.data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t k = 0; k < e.var->value.size(); ++k) {
      m[k] = fb1 * m[k] + (1.0f - fb1) * g[k];
      v[k] = fb2 * v[k] + (1.0f - fb2) * g[k] * g[k];
      w[k] -= step * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

class RunLock {
 public:
  explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    require(f != nullptr, Errc::IoError,
            "run directory is in use (remove " + path_.string() + " if no run is active)");
    std::fclose(f);
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

bool all_finite(const model::DualBranchModel<float>& m) {
  for (const auto& e : m.params().entries())
    for (float v : e.var->value.values())
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

std::string to_jsonl(const StepRecord& r) {
  nlohmann::json j{{"kind", "step"}, {"step", r.step},   {"epoch", r.epoch},
                   {"lr", r.lr},     {"total", r.total}, {"bce", r.bce},
                   {"focal", r.focal}, {"edge", r.edge}};
  if (r.constraint_error) j["constraint_error"] = *r.constraint_error;
  return j.dump();
}

std::string to_jsonl(const EpochRecord& r) {
  nlohmann::json j{{"kind", "epoch"},
                   {"epoch", r.epoch},
                   {"step", r.step},
                   {"mean_loss", r.mean_loss},
                   {"val_auc", opt_json(r.val_auc)},
                   {"val_f1", opt_json(r.val_f1)},
                   {"val_iou", opt_json(r.val_iou)}};
  return j.dump();
}

TrainResult train(const RunConfig& config, const data::Dataset& train_set,
                  const data::Dataset* val_set, const TrainHooks& hooks) {
  config.validate();
  require(train_set.size() > 0, Errc::DataError, "training set is empty");
  require(train_set.input_size() == config.input_size, Errc::DataError,
          "training set was preprocessed at a different input size");

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  RunLock lock(out_dir);
  {
    std::ofstream cfg(out_dir / "config.json");
    require(static_cast<bool>(cfg), Errc::IoError, "cannot write config.json");
    cfg << to_json(config).dump(2) << '\n';
  }
  std::ofstream log_file(out_dir / "train_log.jsonl", std::ios::trunc);
  require(static_cast<bool>(log_file), Errc::IoError, "cannot write train_log.jsonl");

  TrainResult result;
  result.model = std::make_unique<model::DualBranchModel<float>>(config.model, config.seed);
  auto& net = *result.model;
  if (!config.finetune_from.empty()) {
    auto source = load_checkpoint(config.finetune_from);
    require(to_json(source.config) == to_json(config.model), Errc::ConfigError,
            "finetune_from: checkpoint model config differs from the run config");
    load_parameters(config.finetune_from, net);
  }
  nn::Initializer reinit(config.seed ^ 0x9E3779B97F4A7C15ull);
  net.project_constraints(reinit);

  Adam adam(config.optimizer);
  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  std::int64_t step = 0;
  bool stop = false;

  for (int epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> ops(n, 0);
    if (config.augment)
      for (auto& op : ops) op = static_cast<int>(rng() % 8);

    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + bs)));
      const std::vector<int> batch_ops(ops.begin() + static_cast<std::ptrdiff_t>(start),
                                       ops.begin() + static_cast<std::ptrdiff_t>(start + idx.size()));
      const auto batch = train_set.batch(idx, batch_ops);
      const double lr = lr_schedule(config.optimizer.lr0, config.schedule,
                                    config.schedule.unit == ScheduleUnit::Epoch ? epoch : step);

      net.params().zero_grad();
      Tape<float> tape(true);
      auto out = net.forward(tape, tape.constant(batch.image), true);
      auto loss = losses::combined_loss(tape, out.mask_logit, out.edge_logit, batch.mask,
                                        batch.edge, config.loss,
                                        config.model.ablation.use_edge_loss);
      if (!std::isfinite(loss.total_value)) {
        save_checkpoint(out_dir / "last_good.ckpt", net, {step, epoch, config.seed});
        fail(Errc::NumericalDivergence,
             "non-finite loss at step " + std::to_string(step + 1) +
                 "; parameters before this step saved to " + (out_dir / "last_good.ckpt").string());
      }
      tape.backward(loss.total);
      tape.clear();
      adam.step(net.params(), lr);
      net.project_constraints(reinit);
      ++step;

      StepRecord rec{step, epoch, lr, loss.total_value, loss.bce, loss.focal, loss.edge, {}};
      if (step % config.verify_every == 0) {
        const auto report = net.verify_constraints();
        rec.constraint_error = std::max(report.max_center_error, report.max_sum_error);
        require(report.satisfied(), Errc::NumericalDivergence,
                "constrained kernels violate their invariants after step " + std::to_string(step));
      }
      log_file << to_jsonl(rec) << '\n' << std::flush;
      result.log.steps.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec, net);
      epoch_loss += rec.total;
      ++epoch_steps;
    }
    if (epoch_steps == 0) break;

    if (!all_finite(net)) {
      fail(Errc::NumericalDivergence, "non-finite parameters after epoch " + std::to_string(epoch));
    }
    EpochRecord er;
    er.epoch = epoch;
    er.step = step;
    er.mean_loss = epoch_loss / epoch_steps;
    if (val_set && val_set->size() > 0) {
      EvalOptions opts;
      opts.threshold = config.eval_threshold;
      opts.batch_size = config.batch_size;
      const auto r = evaluate(model_predictor(net), *val_set, opts).pooled;
      er.val_auc = r.auc;
      er.val_f1 = r.f1;
      er.val_iou = r.iou;
    }
    log_file << to_jsonl(er) << '\n' << std::flush;
    result.log.epochs.push_back(er);
    if (hooks.on_epoch) hooks.on_epoch(er);
    if (hooks.progress) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %d  step %lld  mean loss %.5f", epoch,
                    static_cast<long long>(step), er.mean_loss);
      *hooks.progress << line;
      if (er.val_auc) *hooks.progress << "  val auc " << *er.val_auc;
      if (er.val_f1) *hooks.progress << "  val f1 " << *er.val_f1;
      *hooks.progress << std::endl;
    }
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch + 1);
      save_checkpoint(out_dir / name, net, {step, epoch + 1, config.seed});
    }
  }

  net.mark_trained();
  const int epochs_done = result.log.epochs.empty() ? 0 : result.log.epochs.back().epoch + 1;
  result.final_checkpoint = out_dir / "final.ckpt";
  save_checkpoint(result.final_checkpoint, net, {step, epochs_done, config.seed});
  return result;
}

TrainResult train(const RunConfig& config, const TrainHooks& hooks) {
  config.validate();
  require(!config.train_manifest.empty(), Errc::ConfigError, "train_manifest is required");
  const auto tm = data::load_manifest(config.train_manifest);
  const auto train_records = tm.select(data::Split::Train);
  require(!train_records.empty(), Errc::DataError,
          "no train records in " + config.train_manifest);
  std::vector<data::ManifestRecord> val_records;
  if (!config.val_manifest.empty())
    val_records = data::load_manifest(config.val_manifest).select(data::Split::Val);
  else
    val_records = tm.select(data::Split::Val);
  data::Dataset train_set(train_records, config.input_size, config.edge_width);
  data::Dataset val_set(val_records, config.input_size, config.edge_width);
  return train(config, train_set, val_records.empty() ? nullptr : &val_set, hooks);
}

}  // namespace dualtrace::engine

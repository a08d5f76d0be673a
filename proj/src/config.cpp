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

#include "dualtrace/config.hpp"

#include <fstream>
#include <set>

#include "dualtrace/error.hpp"

namespace dualtrace::engine {

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), Errc::ConfigError, where_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        require(it->is_boolean(), Errc::ConfigError, path(key) + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        require(it->is_number_integer(), Errc::ConfigError, path(key) + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          require(it->is_number_unsigned(), Errc::ConfigError,
                  path(key) + ": expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        require(it->is_number(), Errc::ConfigError, path(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        require(it->is_string(), Errc::ConfigError, path(key) + ": expected a string");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(Errc::ConfigError, path(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      require(seen_.count(key) != 0, Errc::ConfigError, "unknown key " + path(key));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <std::size_t N>
void get_array(Reader& r, const char* key, std::array<int, N>& out) {
  const json* v = r.child(key);
  if (!v) return;
  require(v->is_array() && v->size() == N, Errc::ConfigError,
          r.path(key) + ": expected an array of " + std::to_string(N) + " integers");
  for (std::size_t i = 0; i < N; ++i) {
    require((*v)[i].is_number_integer(), Errc::ConfigError, r.path(key) + ": expected integers");
    out[i] = (*v)[i].get<int>();
  }
}

json parse_file(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), Errc::ConfigError, "no such config file: " + path.string());
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::ConfigError, "cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    fail(Errc::ConfigError, path.string() + ": " + e.what());
  }
}

model::AblationFlags ablation_from(const json& j, const std::string& where) {
  model::AblationFlags f;
  Reader r(j, where);
  r.get("use_edge_loss", f.use_edge_loss);
  r.get("use_fe", f.use_fe);
  r.get("use_noise_branch", f.use_noise_branch);
  r.get("use_rgb_branch", f.use_rgb_branch);
  r.finish();
  return f;
}

const char* unit_name(ScheduleUnit u) { return u == ScheduleUnit::Epoch ? "epoch" : "step"; }

}  // namespace

json to_json(const model::ModelConfig& c) {
  return json{
      {"backbone",
       {{"stage_dims", c.backbone.stage_dims},
        {"stage_depths", c.backbone.stage_depths},
        {"dw_kernel", c.backbone.dw_kernel},
        {"expansion_ratio", c.backbone.expansion_ratio},
        {"stem_stride", c.backbone.stem_stride}}},
      {"fe", {{"reduce_ratio", c.fe.reduce_ratio}, {"dilation", c.fe.dilation}}},
      {"bayar_kernels", c.bayar_kernels},
      {"bayar_ksize", c.bayar_ksize},
      {"srm_threshold", c.srm_threshold},
      {"srm_input_scale", c.srm_input_scale},
      {"decoder_dims", c.decoder_dims},
      {"ablation",
       {{"use_edge_loss", c.ablation.use_edge_loss},
        {"use_fe", c.ablation.use_fe},
        {"use_noise_branch", c.ablation.use_noise_branch},
        {"use_rgb_branch", c.ablation.use_rgb_branch}}},
  };
}

json to_json(const losses::LossConfig& c) {
  return json{{"focal_alpha", c.focal_alpha}, {"focal_gamma", c.focal_gamma},
              {"dice_smooth", c.dice_smooth}, {"w_bce", c.w_bce},
              {"w_focal", c.w_focal},         {"w_edge", c.w_edge}};
}

json to_json(const synth::SynthConfig& c) {
  return json{{"size", c.size},
              {"area_min", c.area_min},
              {"area_max", c.area_max},
              {"splice", c.splice},
              {"copy_move", c.copy_move},
              {"removal", c.removal},
              {"authentic", c.authentic},
              {"blur_sigma_min", c.blur_sigma_min},
              {"blur_sigma_max", c.blur_sigma_max},
              {"jpeg_quality_min", c.jpeg_quality_min},
              {"jpeg_quality_max", c.jpeg_quality_max},
              {"jpeg_probability", c.jpeg_probability},
              {"noise_sigma", c.noise_sigma},
              {"seed", c.seed},
              {"holdout_fraction", c.holdout_fraction}};
}

json to_json(const RunConfig& c) {
  return json{
      {"model", to_json(c.model)},
      {"loss", to_json(c.loss)},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"lr0", c.optimizer.lr0},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps}}},
      {"schedule",
       {{"factor", c.schedule.factor},
        {"period", c.schedule.period},
        {"unit", unit_name(c.schedule.unit)}}},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"train_manifest", c.train_manifest},
      {"val_manifest", c.val_manifest},
      {"input_size", c.input_size},
      {"edge_width", c.edge_width},
      {"output_dir", c.output_dir},
      {"checkpoint_every", c.checkpoint_every},
      {"verify_every", c.verify_every},
      {"max_steps", c.max_steps},
      {"augment", c.augment},
      {"finetune_from", c.finetune_from},
      {"eval_threshold", c.eval_threshold},
  };
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  Reader r(j, "model");
  if (const json* b = r.child("backbone")) {
    Reader rb(*b, "model.backbone");
    get_array(rb, "stage_dims", c.backbone.stage_dims);
    get_array(rb, "stage_depths", c.backbone.stage_depths);
    rb.get("dw_kernel", c.backbone.dw_kernel);
    rb.get("expansion_ratio", c.backbone.expansion_ratio);
    rb.get("stem_stride", c.backbone.stem_stride);
    rb.finish();
  }
  if (const json* f = r.child("fe")) {
    Reader rf(*f, "model.fe");
    rf.get("reduce_ratio", c.fe.reduce_ratio);
    rf.get("dilation", c.fe.dilation);
    rf.finish();
  }
  r.get("bayar_kernels", c.bayar_kernels);
  r.get("bayar_ksize", c.bayar_ksize);
  r.get("srm_threshold", c.srm_threshold);
  r.get("srm_input_scale", c.srm_input_scale);
  get_array(r, "decoder_dims", c.decoder_dims);
  if (const json* a = r.child("ablation")) c.ablation = ablation_from(*a, "model.ablation");
  r.finish();
  c.validate();
  return c;
}

losses::LossConfig loss_config_from_json(const json& j) {
  losses::LossConfig c;
  Reader r(j, "loss");
  r.get("focal_alpha", c.focal_alpha);
  r.get("focal_gamma", c.focal_gamma);
  r.get("dice_smooth", c.dice_smooth);
  r.get("w_bce", c.w_bce);
  r.get("w_focal", c.w_focal);
  r.get("w_edge", c.w_edge);
  r.finish();
  c.validate();
  return c;
}

synth::SynthConfig synth_config_from_json(const json& j) {
  synth::SynthConfig c;
  Reader r(j, "synth");
  r.get("size", c.size);
  r.get("area_min", c.area_min);
  r.get("area_max", c.area_max);
  r.get("splice", c.splice);
  r.get("copy_move", c.copy_move);
  r.get("removal", c.removal);
  r.get("authentic", c.authentic);
  r.get("blur_sigma_min", c.blur_sigma_min);
  r.get("blur_sigma_max", c.blur_sigma_max);
  r.get("jpeg_quality_min", c.jpeg_quality_min);
  r.get("jpeg_quality_max", c.jpeg_quality_max);
  r.get("jpeg_probability", c.jpeg_probability);
  r.get("noise_sigma", c.noise_sigma);
  r.get("seed", c.seed);
  r.get("holdout_fraction", c.holdout_fraction);
  r.finish();
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "run");
  if (const json* m = r.child("model")) c.model = model_config_from_json(*m);
  if (const json* l = r.child("loss")) c.loss = loss_config_from_json(*l);
  if (const json* o = r.child("optimizer")) {
    Reader ro(*o, "run.optimizer");
    ro.get("kind", c.optimizer.kind);
    ro.get("lr0", c.optimizer.lr0);
    ro.get("beta1", c.optimizer.beta1);
    ro.get("beta2", c.optimizer.beta2);
    ro.get("eps", c.optimizer.eps);
    ro.finish();
  }
  if (const json* s = r.child("schedule")) {
    Reader rs(*s, "run.schedule");
    rs.get("factor", c.schedule.factor);
    rs.get("period", c.schedule.period);
    std::string unit = unit_name(c.schedule.unit);
    rs.get("unit", unit);
    require(unit == "epoch" || unit == "step", Errc::ConfigError,
            "run.schedule.unit: expected 'epoch' or 'step'");
    c.schedule.unit = unit == "epoch" ? ScheduleUnit::Epoch : ScheduleUnit::Step;
    rs.finish();
  }
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("train_manifest", c.train_manifest);
  r.get("val_manifest", c.val_manifest);
  r.get("input_size", c.input_size);
  r.get("edge_width", c.edge_width);
  r.get("output_dir", c.output_dir);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("verify_every", c.verify_every);
  r.get("max_steps", c.max_steps);
  r.get("augment", c.augment);
  r.get("finetune_from", c.finetune_from);
  r.get("eval_threshold", c.eval_threshold);
  r.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  require(optimizer.kind == "adam", Errc::ConfigError, "optimizer.kind: only 'adam' is supported");
  require(optimizer.lr0 > 0.0, Errc::ConfigError, "optimizer.lr0 must be positive");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
              optimizer.beta2 < 1.0,
          Errc::ConfigError, "optimizer betas must lie in [0, 1)");
  require(optimizer.eps > 0.0, Errc::ConfigError, "optimizer.eps must be positive");
  require(schedule.factor > 0.0 && schedule.factor < 1.0, Errc::ConfigError,
          "schedule.factor must lie in (0, 1)");
  require(schedule.period >= 1, Errc::ConfigError, "schedule.period must be at least 1");
  require(batch_size >= 1, Errc::ConfigError, "batch_size must be at least 1");
  require(epochs >= 1, Errc::ConfigError, "epochs must be at least 1");
  require(input_size > 0 && input_size % model.backbone.input_multiple() == 0, Errc::ConfigError,
          "input_size must be a positive multiple of " +
              std::to_string(model.backbone.input_multiple()));
  require(edge_width >= 0, Errc::ConfigError, "edge_width must be non-negative");
  require(checkpoint_every >= 0, Errc::ConfigError, "checkpoint_every must be non-negative");
  require(verify_every >= 1, Errc::ConfigError, "verify_every must be at least 1");
  require(max_steps >= 0, Errc::ConfigError, "max_steps must be non-negative");
  require(eval_threshold > 0.0 && eval_threshold < 1.0, Errc::ConfigError,
          "eval_threshold must lie in (0, 1)");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c = run_config_from_json(parse_file(path));
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.train_manifest);
  resolve(c.val_manifest);
  resolve(c.output_dir);
  resolve(c.finetune_from);
  return c;
}

synth::SynthConfig load_synth_config(const std::filesystem::path& path) {
  return synth_config_from_json(parse_file(path));
}

}  // namespace dualtrace::engine

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

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "dualtrace/attention.hpp"
#include "dualtrace/backbone.hpp"
#include "dualtrace/filters.hpp"

namespace dualtrace::model {

/// Component toggles for the ablation cases. Case A drops the edge loss,
/// B the enhancement modules, C the noise branch, D the RGB branch.
struct AblationFlags {
  bool use_edge_loss = true;
  bool use_fe = true;
  bool use_noise_branch = true;
  bool use_rgb_branch = true;

  static AblationFlags full() { return {}; }
  static AblationFlags case_a() { return {false, true, true, true}; }
  static AblationFlags case_b() { return {true, false, true, true}; }
  static AblationFlags case_c() { return {true, true, false, true}; }
  static AblationFlags case_d() { return {true, true, true, false}; }

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  backbone::BackboneConfig backbone;  // in_channels is set per branch
  attention::FeatureEnhanceConfig fe;
  int bayar_kernels = 3;
  int bayar_ksize = 5;
  double srm_threshold = 2.0;
  double srm_input_scale = 255.0;
  /// Widths of the three upsampling stages (stride 16, 8, 4). A stage whose
  /// width differs from the matching skip feature gets a 1x1 lateral conv.
  std::array<int, 3> decoder_dims{128, 64, 32};
  AblationFlags ablation;

  /// Throws ConfigError when both branches are off or a knob is out of range.
  void validate() const;
  filters::SrmBank srm_bank() const;
};

template <typename T>
struct ModelOutput {
  Var<T> mask_logit;                   // N x 1 x H x W
  Var<T> edge_logit;                   // N x 1 x H x W
  std::vector<Var<T>> per_stage_edges; // raw stage logits, strides 4..32
};

template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(nn::ParamStore<T>& store, const std::string& name, const std::array<int, 4>& stage_dims,
          const std::array<int, 3>& decoder_dims, nn::Initializer& init);

  Var<T> operator()(Tape<T>& tape, const std::array<Var<T>, 4>& fused, int out_h, int out_w) const;

 private:
  std::array<nn::Conv2d<T>, 3> conv_;
  std::array<nn::LayerNorm2d<T>, 3> norm_;
  std::array<nn::Conv2d<T>, 3> lateral_;
  std::array<bool, 3> has_lateral_{};
  nn::Conv2d<T> head_;
};

template <typename T>
class DualBranchModel {
 public:
  DualBranchModel(const ModelConfig& config, std::uint64_t seed);

  DualBranchModel(const DualBranchModel&) = delete;
  DualBranchModel& operator=(const DualBranchModel&) = delete;

  /// Throws BadGeometry unless H and W are multiples of the backbone stride,
  /// ShapeMismatch unless the input has 3 channels.
  ModelOutput<T> forward(Tape<T>& tape, const Var<T>& image, bool training);

  /// Re-projects every constrained kernel; returns the number of slices redrawn.
  int project_constraints(nn::Initializer& reinit);
  filters::ConstraintReport verify_constraints() const;

  nn::ParamStore<T>& params() noexcept { return store_; }
  const nn::ParamStore<T>& params() const noexcept { return store_; }
  const ModelConfig& config() const noexcept { return config_; }
  const filters::SrmBank& srm() const noexcept { return srm_; }
  const filters::ConstrainedConv<T>* bayar() const noexcept {
    return config_.ablation.use_noise_branch ? &bayar_ : nullptr;
  }

  /// Set once parameters come from training or a checkpoint.
  bool has_trained_parameters() const noexcept { return trained_; }
  void mark_trained() noexcept { trained_ = true; }

 private:
  ModelConfig config_;
  nn::ParamStore<T> store_;
  filters::SrmBank srm_;
  filters::ConstrainedConv<T> bayar_;
  backbone::Backbone<T> noise_backbone_;
  backbone::Backbone<T> rgb_backbone_;
  std::array<attention::FeatureEnhance<T>, 4> fe_;
  std::array<attention::EdgeExtract<T>, 4> eeb_;
  attention::EdgeFusion<T> edge_fusion_;
  Decoder<T> decoder_;
  bool trained_ = false;
};

/// sigmoid(mask_logit) > threshold as an N x 1 x H x W tensor of {0, 1}.
/// Throws InvalidThreshold outside (0, 1) and NoCheckpoint for a model
/// without trained parameters.
Tensor<float> predict_mask(DualBranchModel<float>& model, const Tensor<float>& image,
                           double threshold = 0.5);

/// Binarization step alone, for callers that already hold logits.
Tensor<float> binarize_logits(const Tensor<float>& mask_logit, double threshold);

}  // namespace dualtrace::model

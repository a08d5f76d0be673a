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

#include "dualtrace/model.hpp"

#include <cmath>

namespace dualtrace::model {

void ModelConfig::validate() const {
  require(ablation.use_noise_branch || ablation.use_rgb_branch, Errc::ConfigError,
          "at least one of use_noise_branch and use_rgb_branch must be enabled");
  backbone.validate();
  fe.validate();
  require(bayar_kernels >= 1, Errc::ConfigError, "bayar_kernels must be >= 1");
  require(bayar_ksize >= 3 && bayar_ksize % 2 == 1, Errc::ConfigError,
          "bayar_ksize must be odd and >= 3");
  require(srm_threshold > 0.0, Errc::ConfigError, "srm_threshold must be positive");
  require(srm_input_scale > 0.0, Errc::ConfigError, "srm_input_scale must be positive");
  for (int d : decoder_dims) require(d > 0, Errc::ConfigError, "decoder_dims must be positive");
  for (int c : backbone.stage_dims)
    require(c % 2 == 0, Errc::ConfigError, "stage_dims must be even for the edge blocks");
}

filters::SrmBank ModelConfig::srm_bank() const {
  auto bank = filters::SrmBank::standard();
  bank.threshold = srm_threshold;
  bank.input_scale = srm_input_scale;
  return bank;
}

template <typename T>
Decoder<T>::Decoder(nn::ParamStore<T>& store, const std::string& name,
                    const std::array<int, 4>& stage_dims, const std::array<int, 3>& decoder_dims,
                    nn::Initializer& init) {
  int in = stage_dims[3];
  for (int j = 0; j < 3; ++j) {
    const std::string stage = name + ".up" + std::to_string(j + 1);
    const int out = decoder_dims[j];
    const int skip = stage_dims[2 - j];
    conv_[j] = nn::Conv2d<T>(store, stage + ".conv", in, out, 3, ops::ConvGeometry{1, 1, 1}, true,
                             init);
    norm_[j] = nn::LayerNorm2d<T>(store, stage + ".norm", out);
    has_lateral_[j] = skip != out;
    if (has_lateral_[j])
      lateral_[j] = nn::Conv2d<T>(store, stage + ".lateral", skip, out, 1, {}, true, init);
    in = out;
  }
  head_ = nn::Conv2d<T>(store, name + ".head", in, 1, 1, {}, true, init);
}

template <typename T>
Var<T> Decoder<T>::operator()(Tape<T>& tape, const std::array<Var<T>, 4>& fused, int out_h,
                              int out_w) const {
  auto d = fused[3];
  for (int j = 0; j < 3; ++j) {
    const auto& skip = fused[2 - j];
    const Shape s = skip->value.shape();
    d = ops::upsample_bilinear(tape, d, s.h, s.w);
    d = ops::gelu(tape, norm_[j](tape, conv_[j](tape, d)));
    d = ops::add(tape, d, has_lateral_[j] ? lateral_[j](tape, skip) : skip);
  }
  auto logit = head_(tape, d);
  return ops::upsample_bilinear(tape, logit, out_h, out_w);
}

template <typename T>
DualBranchModel<T>::DualBranchModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  srm_ = config_.srm_bank();
  nn::Initializer init(seed);
  const auto& flags = config_.ablation;
  const auto& dims = config_.backbone.stage_dims;

  if (flags.use_noise_branch) {
    bayar_ = filters::ConstrainedConv<T>(store_, "noise.bayar", 3, config_.bayar_kernels,
                                         config_.bayar_ksize, init);
    auto cfg = config_.backbone;
    cfg.in_channels = config_.bayar_kernels + srm_.out_channels();
    noise_backbone_ = backbone::Backbone<T>(store_, "noise.backbone", cfg, init);
    if (flags.use_fe)
      for (int i = 0; i < 4; ++i)
        fe_[i] = attention::FeatureEnhance<T>(store_, "noise.fe" + std::to_string(i + 1), dims[i],
                                              config_.fe, init);
  }
  if (flags.use_rgb_branch) {
    auto cfg = config_.backbone;
    cfg.in_channels = 3;
    rgb_backbone_ = backbone::Backbone<T>(store_, "rgb.backbone", cfg, init);
  }
  for (int i = 0; i < 4; ++i)
    eeb_[i] = attention::EdgeExtract<T>(store_, "edge.eeb" + std::to_string(i + 1), 2 * dims[i],
                                        init);
  edge_fusion_ = attention::EdgeFusion<T>(store_, "edge.fusion", 4, init);
  decoder_ = Decoder<T>(store_, "decoder", dims, config_.decoder_dims, init);
}

template <typename T>
ModelOutput<T> DualBranchModel<T>::forward(Tape<T>& tape, const Var<T>& image, bool training) {
  const Shape s = image->value.shape();
  require(s.c == 3, Errc::ShapeMismatch, "model expects N x 3 x H x W, got " + s.str());
  const int multiple = config_.backbone.input_multiple();
  require(s.h > 0 && s.w > 0 && s.h % multiple == 0 && s.w % multiple == 0, Errc::BadGeometry,
          "input " + s.str() + " is not divisible by " + std::to_string(multiple));
  const auto& flags = config_.ablation;

  std::array<Var<T>, 4> noise{}, rgb{}, fused{};
  if (flags.use_noise_branch) {
    auto residual = tape.constant(filters::srm_forward(image->value, srm_));
    auto stem_in = ops::concat_channels(tape, std::vector<Var<T>>{bayar_(tape, image), residual});
    auto pyramid = noise_backbone_(tape, stem_in);
    for (int i = 0; i < 4; ++i)
      noise[i] = flags.use_fe ? fe_[i](tape, pyramid.levels[i], training) : pyramid.levels[i];
  }
  if (flags.use_rgb_branch) rgb = rgb_backbone_(tape, image).levels;

  ModelOutput<T> out;
  for (int i = 0; i < 4; ++i) {
    if (flags.use_noise_branch && flags.use_rgb_branch)
      fused[i] = ops::add(tape, rgb[i], noise[i]);
    else
      fused[i] = flags.use_rgb_branch ? rgb[i] : noise[i];

    const auto& source = flags.use_rgb_branch ? rgb[i] : noise[i];
    auto with_edges = ops::concat_channels(
        tape, std::vector<Var<T>>{source, filters::sobel_magnitude(tape, source)});
    out.per_stage_edges.push_back(eeb_[i](tape, with_edges, training).edge_logit);
  }
  out.edge_logit = edge_fusion_(tape, out.per_stage_edges, s.h, s.w);
  out.mask_logit = decoder_(tape, fused, s.h, s.w);
  return out;
}

template <typename T>
int DualBranchModel<T>::project_constraints(nn::Initializer& reinit) {
  return config_.ablation.use_noise_branch ? bayar_.project(reinit) : 0;
}

template <typename T>
filters::ConstraintReport DualBranchModel<T>::verify_constraints() const {
  return config_.ablation.use_noise_branch ? bayar_.verify() : filters::ConstraintReport{};
}

template class Decoder<float>;
template class Decoder<double>;
template class DualBranchModel<float>;
template class DualBranchModel<double>;

Tensor<float> binarize_logits(const Tensor<float>& mask_logit, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, Errc::InvalidThreshold,
          "threshold must lie in (0, 1), got " + std::to_string(threshold));
  // sigmoid(x) > t  <=>  x > logit(t)
  const double cut = std::log(threshold / (1.0 - threshold));
  Tensor<float> mask(mask_logit.shape());
  auto src = mask_logit.values();
  auto dst = mask.values();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<double>(src[i]) > cut ? 1.0f : 0.0f;
  return mask;
}

Tensor<float> predict_mask(DualBranchModel<float>& model, const Tensor<float>& image,
                           double threshold) {
  require(threshold > 0.0 && threshold < 1.0, Errc::InvalidThreshold,
          "threshold must lie in (0, 1), got " + std::to_string(threshold));
  require(model.has_trained_parameters(), Errc::NoCheckpoint,
          "model has no trained parameters; load a checkpoint first");
  Tape<float> tape(false);
  auto out = model.forward(tape, tape.constant(image), false);
  return binarize_logits(out.mask_logit->value, threshold);
}

}  // namespace dualtrace::model

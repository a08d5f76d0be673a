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

#include <cstdint>
#include <filesystem>
#include <string>

#include "dualtrace/data.hpp"
#include "dualtrace/image_io.hpp"

namespace dualtrace::synth {

struct SynthConfig {
  int size = 256;
  double area_min = 0.02;
  double area_max = 0.2;
  int splice = 86;
  int copy_move = 85;
  int removal = 85;
  int authentic = 0;
  double blur_sigma_min = 0.0;
  double blur_sigma_max = 0.5;
  int jpeg_quality_min = 90;
  int jpeg_quality_max = 100;
  double jpeg_probability = 0.5;
  double noise_sigma = 1.0;
  std::uint64_t seed = 42;
  /// Every 1/holdout_fraction-th sample goes to the test split.
  double holdout_fraction = 0.25;

  int total() const noexcept { return splice + copy_move + removal + authentic; }
  /// Throws ConfigError.
  void validate() const;
};

enum class Manipulation { Splice, CopyMove, Removal, Authentic };

const char* manipulation_name(Manipulation m) noexcept;

struct SynthSample {
  io::Image image;  // RGB
  io::Image mask;   // grey, {0, 255}
  Manipulation type = Manipulation::Authentic;
  std::uint64_t seed = 0;
  double area_fraction = 0.0;
};

/// Independent stream seed for sample `index` of a run.
std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index);

/// Type of sample `index`: types are interleaved round-robin while their
/// counts last.
Manipulation sample_type(const SynthConfig& cfg, int index);

data::Split sample_split(const SynthConfig& cfg, int index);

SynthSample generate_sample(const SynthConfig& cfg, int index);

/// Writes images/, masks/ and manifest.jsonl under `out_dir` and returns the
/// loaded manifest. Throws ConfigError or IoError.
data::Manifest generate_synthetic(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace dualtrace::synth

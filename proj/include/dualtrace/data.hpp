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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dualtrace/image_io.hpp"
#include "dualtrace/tensor.hpp"

namespace dualtrace::data {

inline constexpr int kDefaultInputSize = 256;
inline constexpr int kDefaultEdgeWidth = 2;

/// 1 x 3 x size x size in [0, 1], bilinear (half-pixel centres). Grey
/// images are replicated to three channels.
Tensor<float> preprocess_image(const io::Image& image, int size = kDefaultInputSize);

/// 1 x 1 x size x size in {0, 1}: nearest-neighbour resize of the first
/// channel, then pixels >= 128 become 1.
Tensor<float> preprocess_mask(const io::Image& mask, int size = kDefaultInputSize);

/// Morphological gradient dilate(mask) XOR erode(mask) with a square
/// structuring element of the given radius; pixels outside the image count
/// as background for both operations. Works per N x C plane.
Tensor<float> derive_edge_gt(const Tensor<float>& mask, int width = kDefaultEdgeWidth);

enum class Split { Train, Val, Test };

const char* split_name(Split s) noexcept;
/// Throws BadSplitTag.
Split parse_split(const std::string& tag);

struct ManifestRecord {
  std::filesystem::path image_path;  // resolved against the manifest directory
  std::filesystem::path mask_path;   // empty for authentic images without a mask
  Split split = Split::Train;
  std::string source;
  std::string manipulation;  // optional, from the generator
  std::int64_t seed = -1;    // optional, from the generator
};

struct Manifest {
  std::filesystem::path path;
  std::vector<ManifestRecord> records;

  std::map<std::string, std::size_t> split_counts() const;
  std::vector<ManifestRecord> select(Split split) const;
};

/// One JSON object per line with image_path, mask_path, split and source.
/// Relative paths are resolved against the manifest's directory. Validates
/// eagerly: MissingFile, DimensionMismatch, DuplicatePath, BadSplitTag,
/// DataError for malformed lines.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes records with paths relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

struct ForgerySample {
  Tensor<float> image;  // 1 x 3 x S x S
  Tensor<float> mask;   // 1 x 1 x S x S
  Tensor<float> edge;   // 1 x 1 x S x S
  std::string source;
  std::string manipulation;
};

ForgerySample load_sample(const ManifestRecord& record, int size = kDefaultInputSize,
                          int edge_width = kDefaultEdgeWidth);

/// One of the eight symmetries of the square applied to every plane:
/// mirror left-right when op & 4, then rotate (op & 3) quarter turns
/// clockwise. op = 0 is the identity. Planes must be square.
Tensor<float> dihedral(const Tensor<float>& x, int op);

/// Samples decoded and preprocessed once, kept in memory.
class Dataset {
 public:
  Dataset() = default;
  Dataset(const std::vector<ManifestRecord>& records, int size = kDefaultInputSize,
          int edge_width = kDefaultEdgeWidth);

  std::size_t size() const noexcept { return samples_.size(); }
  const ForgerySample& operator[](std::size_t i) const { return samples_.at(i); }
  int input_size() const noexcept { return size_; }

  struct Batch {
    Tensor<float> image;
    Tensor<float> mask;
    Tensor<float> edge;
  };
  Batch batch(const std::vector<std::size_t>& indices) const;
  /// Same, with dihedral op ops[i] applied to image, mask and edge of sample i.
  Batch batch(const std::vector<std::size_t>& indices, const std::vector<int>& ops) const;

 private:
  int size_ = kDefaultInputSize;
  std::vector<ForgerySample> samples_;
};

}  // namespace dualtrace::data

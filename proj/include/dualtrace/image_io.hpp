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
#include <vector>

namespace dualtrace::io {

/// 8-bit interleaved image, row-major, channels 1 (grey) or 3 (RGB).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, int c) : height(h), width(w), channels(c), pixels(std::size_t(h) * w * c) {}

  std::uint8_t& at(int y, int x, int c) { return pixels[(std::size_t(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(std::size_t(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

struct ImageInfo {
  int height = 0;
  int width = 0;
  int channels = 0;
};

/// Decodes PNG or JPEG (detected from the file signature). Palette, 16-bit
/// and alpha inputs are reduced to 8-bit grey or RGB. Throws MissingFile or
/// DecodeError.
Image read_image(const std::filesystem::path& path);

/// Header-only probe of the same formats.
ImageInfo probe_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG. Throws IoError.
void write_png(const std::filesystem::path& path, const Image& image);

/// In-memory JPEG encode/decode at the given quality (1..100).
Image jpeg_roundtrip(const Image& image, int quality);

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality);
Image decode_jpeg(const std::vector<std::uint8_t>& bytes);

}  // namespace dualtrace::io

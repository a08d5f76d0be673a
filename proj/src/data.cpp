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

#include "dualtrace/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dualtrace/error.hpp"
#include "dualtrace/ops.hpp"
#include "json.hpp"

namespace dualtrace::data {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor<float> preprocess_image(const io::Image& image, int size) {
  require(size > 0, Errc::BadGeometry, "preprocess_image: size must be positive");
  require(image.height > 0 && image.width > 0, Errc::EmptyInput, "preprocess_image: empty image");
  require(image.channels == 1 || image.channels == 3, Errc::BadChannels,
          "preprocess_image: expected 1 or 3 channels");
  Tensor<float> raw(Shape{1, 3, image.height, image.width});
  for (int c = 0; c < 3; ++c) {
    const int src_c = image.channels == 3 ? c : 0;
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        raw(0, c, y, x) = static_cast<float>(image.at(y, x, src_c)) / 255.0f;
  }
  if (image.height == size && image.width == size) return raw;
  auto out = ops::resize_bilinear(raw, size, size);
  for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

namespace {

int nearest_index(int dst, int in, int out) {
  const int i = static_cast<int>((static_cast<long long>(2 * dst + 1) * in) / (2LL * out));
  return std::min(i, in - 1);
}

}  // namespace

Tensor<float> preprocess_mask(const io::Image& mask, int size) {
  require(size > 0, Errc::BadGeometry, "preprocess_mask: size must be positive");
  require(mask.height > 0 && mask.width > 0, Errc::EmptyInput, "preprocess_mask: empty mask");
  Tensor<float> out(Shape{1, 1, size, size});
  for (int y = 0; y < size; ++y) {
    const int sy = nearest_index(y, mask.height, size);
    for (int x = 0; x < size; ++x) {
      const int sx = nearest_index(x, mask.width, size);
      out(0, 0, y, x) = mask.at(sy, sx, 0) >= 128 ? 1.0f : 0.0f;
    }
  }
  return out;
}

namespace {

// 1-D running max (dilate) or min (erode) over [i - r, i + r]; samples
// outside the line are 0.
void line_filter(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride, int r,
                 bool dilate) {
  for (int i = 0; i < n; ++i) {
    std::uint8_t acc = dilate ? 0 : 1;
    if (!dilate && (i - r < 0 || i + r >= n)) {
      out[i * stride] = 0;
      continue;
    }
    for (int k = std::max(0, i - r); k <= std::min(n - 1, i + r); ++k) {
      const std::uint8_t v = in[k * stride];
      acc = dilate ? std::max(acc, v) : std::min(acc, v);
    }
    out[i * stride] = acc;
  }
}

std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& plane, int h, int w, int r,
                                bool dilate) {
  std::vector<std::uint8_t> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < h; ++y)
    line_filter(plane.data() + std::size_t(y) * w, tmp.data() + std::size_t(y) * w, w, 1, r,
                dilate);
  for (int x = 0; x < w; ++x) line_filter(tmp.data() + x, out.data() + x, h, w, r, dilate);
  return out;
}

}  // namespace

Tensor<float> derive_edge_gt(const Tensor<float>& mask, int width) {
  require(width >= 0, Errc::ConfigError, "derive_edge_gt: width must be non-negative");
  const Shape s = mask.shape();
  Tensor<float> out(s);
  const std::size_t plane = s.plane();
  std::vector<std::uint8_t> bits(plane);
  for (std::size_t p = 0; p < std::size_t(s.n) * s.c; ++p) {
    const float* src = mask.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) bits[i] = src[i] >= 0.5f ? 1 : 0;
    const auto d = morph(bits, s.h, s.w, width, true);
    const auto e = morph(bits, s.h, s.w, width, false);
    float* dst = out.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (d[i] ^ e[i]) ? 1.0f : 0.0f;
  }
  return out;
}

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& tag) {
  if (tag == "train") return Split::Train;
  if (tag == "val") return Split::Val;
  if (tag == "test") return Split::Test;
  fail(Errc::BadSplitTag, "unknown split tag '" + tag + "' (expected train, val or test)");
}

std::map<std::string, std::size_t> Manifest::split_counts() const {
  std::map<std::string, std::size_t> counts{{"train", 0}, {"val", 0}, {"test", 0}};
  for (const auto& r : records) ++counts[split_name(r.split)];
  return counts;
}

std::vector<ManifestRecord> Manifest::select(Split split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal();
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  require(it != obj.end() && it->is_string(), Errc::DataError,
          where + ": missing or non-string field '" + key + "'");
  return it->get<std::string>();
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  require(fs::exists(path), Errc::MissingFile, "no such manifest: " + path.string());
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");

  Manifest m;
  m.path = path;
  std::set<fs::path> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::DataError, where + ": " + e.what());
    }
    require(obj.is_object(), Errc::DataError, where + ": expected a JSON object");

    ManifestRecord r;
    r.image_path = resolve(base, string_field(obj, "image_path", where));
    r.split = parse_split(string_field(obj, "split", where));
    r.source = string_field(obj, "source", where);
    if (auto it = obj.find("mask_path"); it != obj.end() && !it->is_null()) {
      require(it->is_string(), Errc::DataError, where + ": mask_path must be a string or null");
      r.mask_path = resolve(base, it->get<std::string>());
    }
    if (auto it = obj.find("type"); it != obj.end() && it->is_string())
      r.manipulation = it->get<std::string>();
    if (auto it = obj.find("seed"); it != obj.end() && it->is_number_integer())
      r.seed = it->get<std::int64_t>();

    require(seen.insert(r.image_path).second, Errc::DuplicatePath,
            where + ": duplicate image path " + r.image_path.string());
    require(fs::exists(r.image_path), Errc::MissingFile,
            where + ": image not found: " + r.image_path.string());
    if (!r.mask_path.empty()) {
      require(fs::exists(r.mask_path), Errc::MissingFile,
              where + ": mask not found: " + r.mask_path.string());
      const auto ii = io::probe_image(r.image_path);
      const auto mi = io::probe_image(r.mask_path);
      require(ii.height == mi.height && ii.width == mi.width, Errc::DimensionMismatch,
              where + ": image is " + std::to_string(ii.width) + "x" + std::to_string(ii.height) +
                  " but mask is " + std::to_string(mi.width) + "x" + std::to_string(mi.height));
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRecord>& records) {
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::IoError, "cannot write " + path.string());
  auto rel = [&](const fs::path& p) {
    const auto r = p.lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  for (const auto& r : records) {
    json obj;
    obj["image_path"] = rel(r.image_path);
    obj["mask_path"] = r.mask_path.empty() ? json(nullptr) : json(rel(r.mask_path));
    obj["split"] = split_name(r.split);
    obj["source"] = r.source;
    if (!r.manipulation.empty()) obj["type"] = r.manipulation;
    if (r.seed >= 0) obj["seed"] = r.seed;
    out << obj.dump() << '\n';
  }
  require(static_cast<bool>(out), Errc::IoError, "error writing " + path.string());
}

ForgerySample load_sample(const ManifestRecord& record, int size, int edge_width) {
  ForgerySample s;
  const auto image = io::read_image(record.image_path);
  s.image = preprocess_image(image, size);
  if (record.mask_path.empty()) {
    s.mask = Tensor<float>(Shape{1, 1, size, size});
  } else {
    const auto mask = io::read_image(record.mask_path);
    require(mask.height == image.height && mask.width == image.width, Errc::DimensionMismatch,
            "mask size differs from image: " + record.mask_path.string());
    s.mask = preprocess_mask(mask, size);
  }
  s.edge = derive_edge_gt(s.mask, edge_width);
  s.source = record.source;
  s.manipulation = record.manipulation;
  return s;
}

Dataset::Dataset(const std::vector<ManifestRecord>& records, int size, int edge_width)
    : size_(size) {
  samples_.reserve(records.size());
  for (const auto& r : records) samples_.push_back(load_sample(r, size, edge_width));
}

namespace {

void dihedral_plane(const float* src, float* dst, int size, int op) {
  const int last = size - 1;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int ty = y, tx = (op & 4) ? last - x : x;
      for (int r = 0; r < (op & 3); ++r) {
        const int ny = tx;
        tx = last - ty;
        ty = ny;
      }
      dst[std::size_t(ty) * size + tx] = src[std::size_t(y) * size + x];
    }
}

}  // namespace

Tensor<float> dihedral(const Tensor<float>& x, int op) {
  const auto s = x.shape();
  require(s.h == s.w, Errc::ShapeMismatch, "dihedral: planes must be square");
  require(op >= 0 && op < 8, Errc::ConfigError, "dihedral: op must lie in [0, 8)");
  Tensor<float> out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) dihedral_plane(x.plane(n, c), out.plane(n, c), s.h, op);
  return out;
}

Dataset::Batch Dataset::batch(const std::vector<std::size_t>& indices) const {
  return batch(indices, std::vector<int>(indices.size(), 0));
}

Dataset::Batch Dataset::batch(const std::vector<std::size_t>& indices,
                              const std::vector<int>& ops) const {
  require(!indices.empty(), Errc::EmptyInput, "Dataset::batch: no indices");
  require(ops.size() == indices.size(), Errc::ShapeMismatch, "Dataset::batch: one op per index");
  const int n = static_cast<int>(indices.size());
  Batch b{Tensor<float>(Shape{n, 3, size_, size_}), Tensor<float>(Shape{n, 1, size_, size_}),
          Tensor<float>(Shape{n, 1, size_, size_})};
  const std::size_t plane = std::size_t(size_) * size_;
  for (int i = 0; i < n; ++i) {
    const auto& s = samples_.at(indices[i]);
    const int op = ops[i];
    require(op >= 0 && op < 8, Errc::ConfigError, "Dataset::batch: op must lie in [0, 8)");
    for (int c = 0; c < 3; ++c) dihedral_plane(s.image.plane(0, c), b.image.plane(i, c), size_, op);
    dihedral_plane(s.mask.data(), b.mask.data() + i * plane, size_, op);
    dihedral_plane(s.edge.data(), b.edge.data() + i * plane, size_, op);
  }
  return b;
}

}  // namespace dualtrace::data

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

#include "dualtrace/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <vector>

#include "dualtrace/error.hpp"

namespace dualtrace::synth {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  require(size >= 16, Errc::ConfigError, "synth: size must be at least 16");
  require(area_min > 0.0 && area_max < 1.0 && area_min <= area_max, Errc::ConfigError,
          "synth: area range must satisfy 0 < min <= max < 1");
  require(splice >= 0 && copy_move >= 0 && removal >= 0 && authentic >= 0, Errc::ConfigError,
          "synth: counts must be non-negative");
  require(total() > 0, Errc::ConfigError, "synth: all counts are zero");
  require(blur_sigma_min >= 0.0 && blur_sigma_min <= blur_sigma_max, Errc::ConfigError,
          "synth: blur sigma range must satisfy 0 <= min <= max");
  require(jpeg_quality_min >= 1 && jpeg_quality_max <= 100 && jpeg_quality_min <= jpeg_quality_max,
          Errc::ConfigError, "synth: JPEG quality range must lie in [1, 100]");
  require(jpeg_probability >= 0.0 && jpeg_probability <= 1.0, Errc::ConfigError,
          "synth: jpeg_probability must lie in [0, 1]");
  require(noise_sigma >= 0.0, Errc::ConfigError, "synth: noise_sigma must be non-negative");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, Errc::ConfigError,
          "synth: holdout_fraction must lie in [0, 1)");
}

const char* manipulation_name(Manipulation m) noexcept {
  switch (m) {
    case Manipulation::Splice:
      return "splice";
    case Manipulation::CopyMove:
      return "copy_move";
    case Manipulation::Removal:
      return "removal";
    case Manipulation::Authentic:
      return "authentic";
  }
  return "authentic";
}

std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  // Kept within int64 so it survives a JSON round trip unchanged.
  return ((std::uint64_t(out[0]) << 32) | out[1]) & 0x7FFFFFFFFFFFFFFFull;
}

Manipulation sample_type(const SynthConfig& cfg, int index) {
  std::array<int, 4> left{cfg.splice, cfg.copy_move, cfg.removal, cfg.authentic};
  require(index >= 0 && index < cfg.total(), Errc::ConfigError, "synth: sample index out of range");
  int i = 0;
  for (;;) {
    for (int t = 0; t < 4; ++t) {
      if (left[t] == 0) continue;
      if (i == index) return static_cast<Manipulation>(t);
      --left[t];
      ++i;
    }
  }
}

data::Split sample_split(const SynthConfig& cfg, int index) {
  const double f = cfg.holdout_fraction;
  const bool test = std::floor((index + 1) * f + 1e-9) > std::floor(index * f + 1e-9);
  return test ? data::Split::Test : data::Split::Train;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Float RGB image in 8-bit units, planar.
struct Canvas {
  int size = 0;
  std::array<std::vector<float>, 3> ch;

  explicit Canvas(int s) : size(s) {
    for (auto& c : ch) c.assign(std::size_t(s) * s, 0.0f);
  }
  float& at(int c, int y, int x) { return ch[c][std::size_t(y) * size + x]; }
  float at(int c, int y, int x) const { return ch[c][std::size_t(y) * size + x]; }

  float bilinear(int c, double y, double x) const {
    y = std::clamp(y, 0.0, double(size - 1));
    x = std::clamp(x, 0.0, double(size - 1));
    const int y0 = std::min(int(y), size - 2), x0 = std::min(int(x), size - 2);
    const double fy = y - y0, fx = x - x0;
    return static_cast<float>((1 - fy) * ((1 - fx) * at(c, y0, x0) + fx * at(c, y0, x0 + 1)) +
                              fy * ((1 - fx) * at(c, y0 + 1, x0) + fx * at(c, y0 + 1, x0 + 1)));
  }
};

// Multi-octave value noise in roughly [0, 1].
std::vector<float> value_noise(Rng& rng, int size, double base_cell, int octaves) {
  std::vector<float> out(std::size_t(size) * size, 0.0f);
  double amp = 1.0, total = 0.0, cell = base_cell;
  for (int o = 0; o < octaves; ++o) {
    const int n = static_cast<int>(std::ceil(size / cell)) + 2;
    std::vector<float> grid(std::size_t(n) * n);
    for (auto& g : grid) g = static_cast<float>(uniform(rng, 0.0, 1.0));
    for (int y = 0; y < size; ++y) {
      const double gy = y / cell;
      const int iy = int(gy);
      double ty = gy - iy;
      ty = ty * ty * (3 - 2 * ty);
      for (int x = 0; x < size; ++x) {
        const double gx = x / cell;
        const int ix = int(gx);
        double tx = gx - ix;
        tx = tx * tx * (3 - 2 * tx);
        const auto g = [&](int yy, int xx) { return grid[std::size_t(yy) * n + xx]; };
        const double top = g(iy, ix) * (1 - tx) + g(iy, ix + 1) * tx;
        const double bot = g(iy + 1, ix) * (1 - tx) + g(iy + 1, ix + 1) * tx;
        out[std::size_t(y) * size + x] += static_cast<float>(amp * (top * (1 - ty) + bot * ty));
      }
    }
    total += amp;
    amp *= 0.5;
    cell = std::max(1.0, cell / 2);
  }
  for (auto& v : out) v = static_cast<float>(v / total);
  return out;
}

// Procedural background: two-colour value-noise blend, a linear gradient and
// fine texture. Noise-free; sensor noise is added separately.
Canvas background(Rng& rng, int size) {
  Canvas c(size);
  const auto blend = value_noise(rng, size, size / 3.0, 4);
  const auto fine = value_noise(rng, size, std::max(2.0, size / 32.0), 2);
  std::array<double, 3> c0{}, c1{};
  for (int k = 0; k < 3; ++k) {
    c0[k] = uniform(rng, 30, 200);
    c1[k] = uniform(rng, 30, 200);
  }
  const double angle = uniform(rng, 0, 2 * std::numbers::pi);
  const double grad = uniform(rng, -40, 40);
  const double texture = uniform(rng, 5, 25);
  const double gx = std::cos(angle) / size, gy = std::sin(angle) / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const std::size_t i = std::size_t(y) * size + x;
      const double t = blend[i];
      const double g = grad * ((x - size / 2.0) * gx + (y - size / 2.0) * gy);
      const double f = texture * (fine[i] - 0.5);
      for (int k = 0; k < 3; ++k)
        c.at(k, y, x) = static_cast<float>(c0[k] * (1 - t) + c1[k] * t + g + f);
    }
  return c;
}

void add_noise(Canvas& c, Rng& rng, double sigma, const std::vector<std::uint8_t>* region,
               bool inside) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> n(0.0, sigma);
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < c.ch[k].size(); ++i) {
      const float e = static_cast<float>(n(rng));
      if (region && ((*region)[i] != 0) != inside) continue;
      c.ch[k][i] += e;
    }
}

void gaussian_blur(Canvas& c, double sigma) {
  if (sigma < 0.05) return;
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> w(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) sum += w[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : w) v /= sum;
  const int s = c.size;
  std::vector<float> tmp(std::size_t(s) * s);
  for (auto& plane : c.ch) {
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += w[i + r] * plane[std::size_t(y) * s + std::clamp(x + i, 0, s - 1)];
        tmp[std::size_t(y) * s + x] = static_cast<float>(acc);
      }
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          acc += w[i + r] * tmp[std::size_t(std::clamp(y + i, 0, s - 1)) * s + x];
        plane[std::size_t(y) * s + x] = static_cast<float>(acc);
      }
  }
}

struct Blob {
  double cx = 0, cy = 0, radius = 0;
  std::array<double, 3> amp{}, phase{};

  double rho(double theta) const {
    double f = 1.0;
    for (int k = 0; k < 3; ++k) f += amp[k] * std::cos((k + 2) * theta + phase[k]);
    return radius * f;
  }
  double max_radius() const { return radius * (1.0 + amp[0] + amp[1] + amp[2]); }
  bool contains(double y, double x) const {
    const double dx = x - cx, dy = y - cy;
    return std::hypot(dx, dy) <= rho(std::atan2(dy, dx));
  }
};

std::size_t rasterize(const Blob& b, int size, std::vector<std::uint8_t>& mask) {
  mask.assign(std::size_t(size) * size, 0);
  std::size_t area = 0;
  const double rmax = b.max_radius();
  const int y0 = std::max(0, int(std::floor(b.cy - rmax))), y1 = std::min(size - 1, int(std::ceil(b.cy + rmax)));
  const int x0 = std::max(0, int(std::floor(b.cx - rmax))), x1 = std::min(size - 1, int(std::ceil(b.cx + rmax)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (b.contains(y + 0.5, x + 0.5)) {
        mask[std::size_t(y) * size + x] = 1;
        ++area;
      }
  return area;
}

// Random star-shaped blob whose rasterized area fraction lies in the
// configured range.
Blob make_blob(Rng& rng, const SynthConfig& cfg, std::vector<std::uint8_t>& mask) {
  const int s = cfg.size;
  const double pixels = double(s) * s;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Blob b;
    for (int k = 0; k < 3; ++k) {
      b.amp[k] = uniform(rng, 0.0, 0.15);
      b.phase[k] = uniform(rng, 0.0, 2 * std::numbers::pi);
    }
    b.cx = uniform(rng, 0.25 * s, 0.75 * s);
    b.cy = uniform(rng, 0.25 * s, 0.75 * s);
    const double target = uniform(rng, cfg.area_min, cfg.area_max) * pixels;
    double lo = 0.0, hi = 2.0 * s;
    for (int it = 0; it < 40; ++it) {
      b.radius = 0.5 * (lo + hi);
      (rasterize(b, s, mask) < target ? lo : hi) = b.radius;
    }
    b.radius = hi;
    const double frac = rasterize(b, s, mask) / pixels;
    if (frac >= cfg.area_min && frac <= cfg.area_max) return b;
  }
  fail(Errc::ConfigError, "synth: could not place a region within the requested area range");
}

// Noise level of a manipulated region: clearly above or clearly below the
// host's.
double contrasting_sigma(Rng& rng, double host) {
  return uniform(rng, 0.0, 1.0) < 0.5 ? host * uniform(rng, 2.5, 4.0) : host * uniform(rng, 0.0, 0.25);
}

void splice(Canvas& img, Rng& rng, const std::vector<std::uint8_t>& mask, double host_sigma) {
  Canvas donor = background(rng, img.size);
  const double sigma = contrasting_sigma(rng, host_sigma);
  if (sigma < host_sigma) gaussian_blur(donor, uniform(rng, 0.6, 1.2));
  add_noise(donor, rng, sigma, nullptr, true);
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) img.ch[k][i] = donor.ch[k][i];
}

void copy_move(Canvas& img, Rng& rng, const Blob& blob, const std::vector<std::uint8_t>& mask) {
  const int s = img.size;
  const double dist = uniform(rng, 1.1, 1.8) * blob.max_radius();
  const double angle = uniform(rng, 0, 2 * std::numbers::pi);
  const double sx = std::clamp(blob.cx + dist * std::cos(angle), 0.0, double(s - 1));
  const double sy = std::clamp(blob.cy + dist * std::sin(angle), 0.0, double(s - 1));
  // Resampling at a non-integer scale and sub-pixel offset low-passes the
  // copied region's sensor noise.
  const double scale =
      uniform(rng, 0, 1) < 0.5 ? uniform(rng, 0.8, 0.92) : uniform(rng, 1.08, 1.25);
  const double jx = uniform(rng, 0.3, 0.7), jy = uniform(rng, 0.3, 0.7);
  const double gain = uniform(rng, 0.9, 1.1);
  const Canvas src = img;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      if (!mask[std::size_t(y) * s + x]) continue;
      const double ys = sy + (y - blob.cy) / scale + jy;
      const double xs = sx + (x - blob.cx) / scale + jx;
      for (int k = 0; k < 3; ++k)
        img.at(k, y, x) = static_cast<float>(gain * src.bilinear(k, ys, xs));
    }
}

// Harmonic fill of the region from its surroundings, then new noise.
void removal(Canvas& img, Rng& rng, const std::vector<std::uint8_t>& mask, double host_sigma) {
  const int s = img.size;
  std::vector<int> idx;
  for (int i = 0; i < s * s; ++i)
    if (mask[i]) idx.push_back(i);
  for (int k = 0; k < 3; ++k) {
    auto& p = img.ch[k];
    double mean = 0;
    for (float v : p) mean += v;
    mean /= p.size();
    for (int i : idx) p[i] = static_cast<float>(mean);
    // Coarse-to-fine: a few sweeps at growing strides speed up convergence.
    for (int stride : {16, 8, 4, 2, 1}) {
      for (int sweep = 0; sweep < 40; ++sweep)
        for (int i : idx) {
          const int y = i / s, x = i % s;
          double acc = 0;
          int n = 0;
          for (auto [dy, dx] : {std::pair{-stride, 0}, {stride, 0}, {0, -stride}, {0, stride}}) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= s || xx < 0 || xx >= s) continue;
            acc += p[std::size_t(yy) * s + xx];
            ++n;
          }
          if (n) p[i] = static_cast<float>(acc / n);
        }
    }
  }
  add_noise(img, rng, contrasting_sigma(rng, host_sigma), &mask, true);
}

io::Image quantize(const Canvas& c) {
  io::Image out(c.size, c.size, 3);
  for (int y = 0; y < c.size; ++y)
    for (int x = 0; x < c.size; ++x)
      for (int k = 0; k < 3; ++k)
        out.at(y, x, k) =
            static_cast<std::uint8_t>(std::clamp(std::lround(c.at(k, y, x)), 0L, 255L));
  return out;
}

}  // namespace

SynthSample generate_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  SynthSample out;
  out.type = sample_type(cfg, index);
  out.seed = sample_seed(cfg.seed, static_cast<std::uint64_t>(index));
  Rng rng(out.seed);
  const int s = cfg.size;

  Canvas img = background(rng, s);
  const double host_sigma = uniform(rng, 2.0, 4.0);
  add_noise(img, rng, host_sigma, nullptr, true);

  std::vector<std::uint8_t> mask(std::size_t(s) * s, 0);
  if (out.type != Manipulation::Authentic) {
    const Blob blob = make_blob(rng, cfg, mask);
    switch (out.type) {
      case Manipulation::Splice:
        splice(img, rng, mask, host_sigma);
        break;
      case Manipulation::CopyMove:
        copy_move(img, rng, blob, mask);
        break;
      case Manipulation::Removal:
        removal(img, rng, mask, host_sigma);
        break;
      case Manipulation::Authentic:
        break;
    }
  }

  gaussian_blur(img, uniform(rng, cfg.blur_sigma_min, cfg.blur_sigma_max));
  add_noise(img, rng, cfg.noise_sigma, nullptr, true);
  out.image = quantize(img);
  const bool jpeg = uniform(rng, 0.0, 1.0) < cfg.jpeg_probability;
  const int quality =
      std::uniform_int_distribution<int>(cfg.jpeg_quality_min, cfg.jpeg_quality_max)(rng);
  if (jpeg) out.image = io::jpeg_roundtrip(out.image, quality);

  out.mask = io::Image(s, s, 1);
  std::size_t area = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.mask.pixels[i] = mask[i] ? 255 : 0;
    area += mask[i];
  }
  out.area_fraction = double(area) / (double(s) * s);
  return out;
}

data::Manifest generate_synthetic(const SynthConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  fs::create_directories(out_dir / "masks", ec);
  require(!ec, Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<data::ManifestRecord> records;
  for (int i = 0; i < cfg.total(); ++i) {
    const auto sample = generate_sample(cfg, i);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%05d.png", i);
    data::ManifestRecord r;
    r.image_path = out_dir / "images" / name;
    io::write_png(r.image_path, sample.image);
    if (sample.type != Manipulation::Authentic) {
      r.mask_path = out_dir / "masks" / name;
      io::write_png(r.mask_path, sample.mask);
    }
    r.split = sample_split(cfg, i);
    r.source = "synthetic";
    r.manipulation = manipulation_name(sample.type);
    r.seed = static_cast<std::int64_t>(sample.seed);
    records.push_back(std::move(r));
  }
  const auto manifest = out_dir / "manifest.jsonl";
  data::write_manifest(manifest, records);
  return data::load_manifest(manifest);
}

}  // namespace dualtrace::synth

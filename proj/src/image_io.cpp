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

#include "dualtrace/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include <jpeglib.h>

#include "dualtrace/error.hpp"

namespace dualtrace::io {

namespace {

enum class Format { Png, Jpeg, Unknown };

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), Errc::MissingFile, "no such file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Format sniff(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return Format::Png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return Format::Jpeg;
  return Format::Unknown;
}

struct PngImage {
  png_image img{};
  PngImage() { img.version = PNG_IMAGE_VERSION; }
  ~PngImage() { png_image_free(&img); }
};

void begin_png(PngImage& p, const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()))
    fail(Errc::DecodeError, what + ": " + p.img.message);
}

int png_channels(const png_image& img) { return (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1; }

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  PngImage p;
  begin_png(p, bytes, what);
  const int channels = png_channels(p.img);
  p.img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image out(static_cast<int>(p.img.height), static_cast<int>(p.img.width), channels);
  if (!png_image_finish_read(&p.img, nullptr, out.pixels.data(), 0, nullptr))
    fail(Errc::DecodeError, what + ": " + p.img.message);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

Image decode_jpeg_impl(const std::uint8_t* data, std::size_t size, bool header_only,
                       const std::string& what) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Image out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(Errc::DecodeError, what + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  const bool grey = cinfo.num_components == 1;
  cinfo.out_color_space = grey ? JCS_GRAYSCALE : JCS_RGB;
  if (header_only) {
    out.height = static_cast<int>(cinfo.image_height);
    out.width = static_cast<int>(cinfo.image_width);
    out.channels = grey ? 1 : 3;
    jpeg_destroy_decompress(&cinfo);
    return out;
  }
  jpeg_start_decompress(&cinfo);
  out = Image(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width),
              static_cast<int>(cinfo.output_components));
  const std::size_t stride = std::size_t(out.width) * out.channels;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  switch (sniff(bytes)) {
    case Format::Png:
      return decode_png(bytes, path.string());
    case Format::Jpeg:
      return decode_jpeg_impl(bytes.data(), bytes.size(), false, path.string());
    default:
      fail(Errc::DecodeError, path.string() + ": unsupported image format (PNG or JPEG expected)");
  }
}

ImageInfo probe_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  switch (sniff(bytes)) {
    case Format::Png: {
      PngImage p;
      begin_png(p, bytes, path.string());
      return {static_cast<int>(p.img.height), static_cast<int>(p.img.width),
              png_channels(p.img)};
    }
    case Format::Jpeg: {
      const auto hdr = decode_jpeg_impl(bytes.data(), bytes.size(), true, path.string());
      return {hdr.height, hdr.width, hdr.channels};
    }
    default:
      fail(Errc::DecodeError, path.string() + ": unsupported image format (PNG or JPEG expected)");
  }
}

void write_png(const std::filesystem::path& path, const Image& image) {
  require(image.channels == 1 || image.channels == 3, Errc::IoError,
          "write_png: only grey or RGB images are supported");
  PngImage p;
  p.img.width = static_cast<png_uint_32>(image.width);
  p.img.height = static_cast<png_uint_32>(image.height);
  p.img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&p.img, path.c_str(), 0, image.pixels.data(), 0, nullptr))
    fail(Errc::IoError, "cannot write " + path.string() + ": " + p.img.message);
}

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
  require(image.channels == 1 || image.channels == 3, Errc::IoError,
          "encode_jpeg: only grey or RGB images are supported");
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    fail(Errc::IoError, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(image.width);
  cinfo.image_height = static_cast<JDIMENSION>(image.height);
  cinfo.input_components = image.channels;
  cinfo.in_color_space = image.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, std::clamp(quality, 1, 100), TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = std::size_t(image.width) * image.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(image.pixels.data() + stride * cinfo.next_scanline);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&cinfo);
  std::free(buffer);
  return out;
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes) {
  return decode_jpeg_impl(bytes.data(), bytes.size(), false, "jpeg buffer");
}

Image jpeg_roundtrip(const Image& image, int quality) {
  return decode_jpeg(encode_jpeg(image, quality));
}

}  // namespace dualtrace::io

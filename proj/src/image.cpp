// Copyright 2026 The T2I Audit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "t2i/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "t2i/error.hpp"
#include "t2i/fileio.hpp"

namespace t2i {

PixelRect clamp_to(const PixelRect& r, int width, int height) {
  PixelRect c{std::clamp(r.x0, 0, width), std::clamp(r.y0, 0, height),
              std::clamp(r.x1, 0, width), std::clamp(r.y1, 0, height)};
  return c;
}

Raster crop(const Raster& image, const PixelRect& rect) {
  const PixelRect r = clamp_to(rect, image.width, image.height);
  if (r.empty()) return {};
  Raster out(r.width(), r.height());
  for (int y = 0; y < out.height; ++y) {
    std::memcpy(out.pixel(0, y), image.pixel(r.x0, r.y0 + y),
                std::size_t(out.width) * 3);
  }
  return out;
}

Raster resize_bilinear(const Raster& image, int width, int height) {
  if (image.empty() || width <= 0 || height <= 0) {
    throw Error(ErrorKind::input, "resize of an empty raster");
  }
  if (image.width == width && image.height == height) return image;
  Raster out(width, height);
  const double sx = double(image.width) / width;
  const double sy = double(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      const std::uint8_t* p00 = image.pixel(x0, y0);
      const std::uint8_t* p10 = image.pixel(x1, y0);
      const std::uint8_t* p01 = image.pixel(x0, y1);
      const std::uint8_t* p11 = image.pixel(x1, y1);
      std::uint8_t* dst = out.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + (p10[c] - p00[c]) * wx;
        const double bot = p01[c] + (p11[c] - p01[c]) * wx;
        const double v = top + (bot - top) * wy;
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::input, std::string("undecodable image: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Raster out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::input, "undecodable image: " + msg);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Raster& image) {
  if (image.empty()) throw Error(ErrorKind::input, "cannot encode an empty raster");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.rgb.data(), 0,
                                 nullptr)) {
    throw Error(ErrorKind::input, std::string("png encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> buf(size);
  if (!png_image_write_to_memory(&img, buf.data(), &size, 0, image.rgb.data(),
                                 0, nullptr)) {
    throw Error(ErrorKind::input, std::string("png encode failed: ") + img.message);
  }
  buf.resize(size);
  return buf;
}

Raster read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_png({reinterpret_cast<const std::uint8_t*>(bytes.data()),
                       bytes.size()});
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const Raster& image) {
  const auto buf = encode_png(image);
  write_file_atomic(path, {reinterpret_cast<const char*>(buf.data()), buf.size()});
}

}  // namespace t2i

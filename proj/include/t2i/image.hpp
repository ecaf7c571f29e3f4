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
#ifndef T2I_IMAGE_HPP
#define T2I_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace t2i {

// 8-bit interleaved RGB raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), rgb(std::size_t(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t* pixel(int x, int y) { return &rgb[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgb[(std::size_t(y) * width + x) * 3];
  }
  bool operator==(const Raster&) const = default;
};

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool operator==(const PixelRect&) const = default;
};

PixelRect clamp_to(const PixelRect& r, int width, int height);

Raster crop(const Raster& image, const PixelRect& rect);

// Bilinear resampling with pixel-center alignment. Pure function of its
// inputs.
Raster resize_bilinear(const Raster& image, int width, int height);

// PNG codec (libpng simplified API). Decoding converts any PNG to RGB8.
Raster decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Raster& image);
Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& image);

}  // namespace t2i

#endif  // T2I_IMAGE_HPP

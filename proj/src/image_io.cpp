/* Copyright 2026 The IDC Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "idc/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace idc {

RgbImage MakeImageGrid(const std::vector<torch::Tensor>& rows, const DataRange& range,
                       std::int64_t pad) {
  if (rows.empty()) throw std::invalid_argument("image grid needs at least one row");
  std::int64_t h = -1, w = -1, cols = 0;
  for (const auto& r : rows) {
    if (r.dim() != 4 || (r.size(1) != 1 && r.size(1) != 3)) {
      throw std::invalid_argument("image grid rows must be [N,1|3,h,w]");
    }
    if (h < 0) {
      h = r.size(2);
      w = r.size(3);
    } else if (r.size(2) != h || r.size(3) != w) {
      throw std::invalid_argument("image grid rows must share one cell size");
    }
    cols = std::max(cols, r.size(0));
  }
  RgbImage img;
  img.width = cols * w + (cols + 1) * pad;
  img.height = static_cast<std::int64_t>(rows.size()) * h +
               (static_cast<std::int64_t>(rows.size()) + 1) * pad;
  img.pixels.assign(img.width * img.height * 3, 255);

  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    auto cells = rows[ri].detach().to(torch::kFloat64).contiguous();
    if (cells.size(1) == 1) cells = cells.expand({cells.size(0), 3, h, w}).contiguous();
    auto acc = cells.accessor<double, 4>();
    const std::int64_t y0 = pad + static_cast<std::int64_t>(ri) * (h + pad);
    for (std::int64_t n = 0; n < cells.size(0); ++n) {
      const std::int64_t x0 = pad + n * (w + pad);
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double v = std::clamp((acc[n][c][y][x] - range.lo) / range.width(), 0.0, 1.0);
            img.pixels[((y0 + y) * img.width + (x0 + x)) * 3 + c] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
          }
        }
      }
    }
  }
  return img;
}

void WritePpm(const RgbImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("writing " + path + " failed");
}

RgbImage ReadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int maxval = 0;
  RgbImage img;
  in >> magic >> img.width >> img.height >> maxval;
  if (!in || magic != "P6" || maxval != 255 || img.width <= 0 || img.height <= 0) {
    throw std::runtime_error(path + ": not an 8-bit binary PPM");
  }
  in.get();
  img.pixels.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error(path + ": truncated PPM");
  return img;
}

}  // namespace idc

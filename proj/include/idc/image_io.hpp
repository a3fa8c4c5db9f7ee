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

#ifndef IDC_IMAGE_IO_HPP_
#define IDC_IMAGE_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idc/codebook.hpp"

namespace idc {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Tiles each row tensor [N,c,h,w] (c = 1 or 3, values in `range`) into one
// grid row; rows may hold different counts. `pad` pixels of white separate
// the cells.
RgbImage MakeImageGrid(const std::vector<torch::Tensor>& rows, const DataRange& range,
                       std::int64_t pad = 1);

// Binary PPM (P6).
void WritePpm(const RgbImage& image, const std::string& path);
RgbImage ReadPpm(const std::string& path);

}  // namespace idc

#endif  // IDC_IMAGE_IO_HPP_

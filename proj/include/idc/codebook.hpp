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

#ifndef IDC_CODEBOOK_HPP_
#define IDC_CODEBOOK_HPP_

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace idc {

struct LabelShape {
  std::int64_t channels = 3;
  std::int64_t height = 32;
  std::int64_t width = 32;

  std::int64_t numel() const { return channels * height * width; }
  std::vector<std::int64_t> dims() const { return {channels, height, width}; }
  bool operator==(const LabelShape&) const = default;
};

// Parses "CxHxW", e.g. "3x32x32".
LabelShape ParseLabelShape(const std::string& text);
std::string ToString(const LabelShape& shape);

struct DataRange {
  double lo = -1.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool operator==(const DataRange&) const = default;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// K orthogonal image-shaped class labels. Immutable after construction.
struct LabelCodebook {
  std::int64_t num_classes = 0;
  LabelShape label_shape;
  DataRange data_range;
  std::uint64_t seed = 0;
  // Seed actually used after rank-deficiency retries.
  std::uint64_t effective_seed = 0;
  torch::Tensor basis;   // [K, c*h*w] float64, orthonormal rows
  torch::Tensor labels;  // [K, c, h, w] float32, inside data_range
  double basis_min = 0.0;
  double basis_max = 0.0;

  // Labels cast to the dtype of `like`.
  torch::Tensor LabelsLike(const torch::Tensor& like) const {
    return labels.to(like.scalar_type());
  }
};

LabelCodebook generate_codebook(std::int64_t num_classes,
                                const LabelShape& label_shape,
                                const DataRange& data_range,
                                std::uint64_t seed);

// L1 distances between each sample and every label.
// sample: [c,h,w] -> [K]; batch [B,c,h,w] -> [B,K]. Differentiable.
torch::Tensor label_distances(const torch::Tensor& sample,
                              const LabelCodebook& codebook);

// argmin of label_distances; ties go to the lowest index.
std::int64_t nearest_label(const torch::Tensor& sample,
                           const LabelCodebook& codebook);
std::vector<std::int64_t> nearest_labels(const torch::Tensor& batch,
                                         const LabelCodebook& codebook);

// Lowest-index argmin over a distance row.
std::int64_t ArgminLowest(const std::vector<double>& distances);

// Self-describing binary record: magic, version, seed, shape, range, labels.
void SaveCodebook(const LabelCodebook& codebook, std::ostream& out);
LabelCodebook LoadCodebook(std::istream& in);
void SaveCodebookFile(const LabelCodebook& codebook, const std::string& path);
LabelCodebook LoadCodebookFile(const std::string& path);

}  // namespace idc

#endif  // IDC_CODEBOOK_HPP_

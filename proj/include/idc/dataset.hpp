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

#ifndef IDC_DATASET_HPP_
#define IDC_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idc/attacks.hpp"
#include "idc/codebook.hpp"

namespace idc {

// Dataset names:
//   shapes-K   builtin synthetic K-class shape images (K in 2..10)
//   cifar10    32x32 CIFAR-10 binary batches under `path`
//   cifar100   32x32 CIFAR-100 binary files under `path` (fine labels)
struct DatasetSpec {
  std::string name = "shapes-4";
  std::string path;
  std::string split = "train";
  std::vector<std::int64_t> classes;  // empty: all classes
  std::int64_t resolution = 16;
  std::int64_t num_samples = 0;       // shapes-K only; 0 picks the split default
  std::uint64_t seed = 0;

  bool operator==(const DatasetSpec&) const = default;
};

struct Dataset {
  std::string name;
  torch::Tensor images;  // [N,c,h,w] float32 in data_range
  std::vector<std::int64_t> labels;
  std::int64_t num_classes = 0;
  // Original class ids, indexed by the remapped label.
  std::vector<std::int64_t> class_ids;
  DataRange data_range;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  LabelShape shape() const {
    return {images.size(1), images.size(2), images.size(3)};
  }
  LabeledImages Head(std::int64_t limit) const;
};

Dataset load_dataset(const DatasetSpec& spec);

// Splits "1,4,8" into integers.
std::vector<std::int64_t> ParseIntList(const std::string& text);

}  // namespace idc

#endif  // IDC_DATASET_HPP_

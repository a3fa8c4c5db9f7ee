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

#ifndef IDC_CLASSIFIER_HPP_
#define IDC_CLASSIFIER_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include <torch/torch.h>

#include "idc/bridge.hpp"
#include "idc/codebook.hpp"
#include "idc/predictor.hpp"

namespace idc {

// Everything inference needs. Read-only during classification.
struct ClassifierBundle {
  BridgeSchedule schedule;
  std::shared_ptr<NoisePredictor> predictor;
  LabelCodebook codebook;
  double tau = 0.1;
  std::int64_t eot_samples = 1;

  // Throws std::invalid_argument if the parts disagree.
  void Validate() const;
};

struct Prediction {
  std::vector<std::int64_t> classes;
  torch::Tensor y0_hat;     // [B,c,h,w]
  torch::Tensor distances;  // [B,K] float64
};

// Translate x [B,c,h,w] to y0_hat and pick the nearest label.
Prediction predict(const ClassifierBundle& bundle, const torch::Tensor& x,
                   torch::Generator& gen);
std::vector<std::int64_t> classify(const ClassifierBundle& bundle,
                                   const torch::Tensor& x, torch::Generator& gen);

struct SoftLogits {
  torch::Tensor probs;      // [B,K] float64, softmax(-tau d)
  torch::Tensor log_probs;  // [B,K] float64
  torch::Tensor distances;  // [B,K] float64
};

// Differentiable w.r.t. x through the whole chain; the chain noise is
// treated as a constant.
SoftLogits soft_logits(const ClassifierBundle& bundle, const torch::Tensor& x,
                       const std::vector<torch::Tensor>& noise);
SoftLogits soft_logits(const ClassifierBundle& bundle, const torch::Tensor& x,
                       torch::Generator& gen);
// Softmax of -tau d for an already computed distance matrix.
SoftLogits soft_logits_from_distances(const torch::Tensor& distances, double tau);

struct Vote {
  std::vector<std::int64_t> classes;
  // Fraction of draws that agree with the winning class, in [0,1].
  std::vector<double> agreement;
};

// Majority vote over n independent classifications; ties break low.
Vote classify_eot(const ClassifierBundle& bundle, const torch::Tensor& x,
                  std::int64_t n, torch::Generator& gen);

}  // namespace idc

#endif  // IDC_CLASSIFIER_HPP_

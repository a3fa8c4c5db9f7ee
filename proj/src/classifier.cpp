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

#include "idc/classifier.hpp"

#include <stdexcept>

namespace idc {

void ClassifierBundle::Validate() const {
  if (!predictor) throw std::invalid_argument("bundle has no predictor");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (eot_samples < 1) throw std::invalid_argument("eot_samples must be >= 1");
  if (codebook.num_classes < 1 || !codebook.labels.defined()) {
    throw std::invalid_argument("bundle has an empty codebook");
  }
  if (auto unet = std::dynamic_pointer_cast<UNetPredictor>(predictor)) {
    const auto& cfg = unet->config();
    const auto& shape = codebook.label_shape;
    if (cfg.in_channels != shape.channels || cfg.out_channels != shape.channels ||
        cfg.base_resolution != shape.height || shape.height != shape.width) {
      throw std::invalid_argument("predictor shape does not match codebook label shape " +
                                  ToString(shape));
    }
    if (cfg.num_timesteps != schedule.num_steps) {
      throw std::invalid_argument("predictor was built for T=" +
                                  std::to_string(cfg.num_timesteps) +
                                  " but the schedule has T=" +
                                  std::to_string(schedule.num_steps));
    }
  }
}

Prediction predict(const ClassifierBundle& bundle, const torch::Tensor& x,
                   torch::Generator& gen) {
  torch::NoGradGuard no_grad;
  Prediction p;
  p.y0_hat = sample_label(bundle.schedule, *bundle.predictor, x, gen);
  p.distances = label_distances(p.y0_hat.to(torch::kFloat64), bundle.codebook);
  p.classes = nearest_labels(p.y0_hat, bundle.codebook);
  return p;
}

std::vector<std::int64_t> classify(const ClassifierBundle& bundle,
                                   const torch::Tensor& x, torch::Generator& gen) {
  return predict(bundle, x, gen).classes;
}

SoftLogits soft_logits_from_distances(const torch::Tensor& distances, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  SoftLogits out;
  out.distances = distances;
  out.log_probs = torch::log_softmax(-tau * distances, 1);
  out.probs = out.log_probs.exp();
  return out;
}

SoftLogits soft_logits(const ClassifierBundle& bundle, const torch::Tensor& x,
                       const std::vector<torch::Tensor>& noise) {
  auto y0_hat = sample_label(bundle.schedule, *bundle.predictor, x, noise);
  auto d = label_distances(y0_hat.to(torch::kFloat64), bundle.codebook);
  return soft_logits_from_distances(d, bundle.tau);
}

SoftLogits soft_logits(const ClassifierBundle& bundle, const torch::Tensor& x,
                       torch::Generator& gen) {
  return soft_logits(bundle, x, draw_chain_noise(bundle.schedule, x, gen));
}

Vote classify_eot(const ClassifierBundle& bundle, const torch::Tensor& x,
                  std::int64_t n, torch::Generator& gen) {
  if (n < 1) throw std::invalid_argument("classify_eot needs n >= 1");
  const auto batch = x.size(0);
  const auto k = bundle.codebook.num_classes;
  std::vector<std::vector<std::int64_t>> counts(batch, std::vector<std::int64_t>(k, 0));
  for (std::int64_t draw = 0; draw < n; ++draw) {
    auto classes = classify(bundle, x, gen);
    for (std::int64_t b = 0; b < batch; ++b) ++counts[b][classes[b]];
  }
  Vote vote;
  for (const auto& row : counts) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < k; ++c) {
      if (row[c] > row[best]) best = c;
    }
    vote.classes.push_back(best);
    vote.agreement.push_back(static_cast<double>(row[best]) / static_cast<double>(n));
  }
  return vote;
}

}  // namespace idc

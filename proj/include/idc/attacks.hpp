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

#ifndef IDC_ATTACKS_HPP_
#define IDC_ATTACKS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idc/classifier.hpp"

namespace idc {

enum class AttackFamily { kFgsm, kPgd, kMifgsm, kCwMargin, kPgdEot, kBpdaEot };
enum class GradientMode { kExact, kBpda };

AttackFamily ParseAttackFamily(const std::string& name);
std::string ToString(AttackFamily family);
GradientMode ParseGradientMode(const std::string& name);
std::string ToString(GradientMode mode);

// Parses "8/255", "0.03" or "0".
double ParseFraction(const std::string& text);

// Budgets and step sizes are in [0,1] pixel units; they are scaled by the
// width of the data range before being applied.
struct AttackConfig {
  AttackFamily family = AttackFamily::kPgd;
  double epsilon = 8.0 / 255.0;
  std::int64_t steps = 20;
  double step_size = 2.0 / 255.0;
  std::int64_t eot_samples = 1;
  GradientMode gradient_mode = GradientMode::kExact;
  double momentum_decay = 1.0;
  bool random_start = true;
  std::uint64_t seed = 0;

  // Per-family defaults for budget `epsilon`.
  static AttackConfig Defaults(AttackFamily family, double epsilon = 8.0 / 255.0);
  void Validate() const;
};

struct SampleRecord {
  std::int64_t index = 0;
  std::int64_t true_class = 0;
  std::int64_t clean_prediction = 0;
  std::int64_t adversarial_prediction = 0;
  double linf = 0.0;  // pixel units
  bool in_range = true;
  bool attacked = false;  // false when the clean prediction was already wrong
};

struct EvalReport {
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  std::int64_t n_samples = 0;
  std::vector<SampleRecord> records;
  AttackConfig attack;
  std::int64_t predictor_eval_count = 0;
  std::int64_t predictor_calls = 0;
  double max_linf = 0.0;
  bool all_in_range = true;
};

// Mean over n_eot noise draws of d CE(soft_logits(x), y) / dx.
// kBpda runs the chain forward and passes the loss gradient at y0_hat
// straight to x.
torch::Tensor estimate_gradient(const ClassifierBundle& bundle,
                                const torch::Tensor& x,
                                const std::vector<std::int64_t>& true_classes,
                                GradientMode mode, std::int64_t n_eot,
                                torch::Generator& gen);

// Projects x_adv onto the L-inf ball of radius `radius` (data units) around x
// and into [lo, hi]; the bound holds exactly when re-checked in float64.
torch::Tensor project_linf(const torch::Tensor& x_adv, const torch::Tensor& x,
                           double radius, const DataRange& range);

torch::Tensor craft_adversarial(const ClassifierBundle& bundle,
                                const torch::Tensor& x,
                                const std::vector<std::int64_t>& true_classes,
                                const AttackConfig& config, torch::Generator& gen);

struct LabeledImages {
  torch::Tensor images;  // [N,c,h,w]
  std::vector<std::int64_t> labels;
};

// Clean accuracy and robust accuracy; misclassified clean samples count as
// successfully attacked.
EvalReport evaluate_robustness(const ClassifierBundle& bundle,
                               const LabeledImages& data,
                               const AttackConfig& config, torch::Generator& gen,
                               std::int64_t batch_size = 64);

}  // namespace idc

#endif  // IDC_ATTACKS_HPP_

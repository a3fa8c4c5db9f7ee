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

#ifndef IDC_TRAIN_HPP_
#define IDC_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idc/bridge.hpp"
#include "idc/classifier.hpp"
#include "idc/codebook.hpp"
#include "idc/dataset.hpp"
#include "idc/predictor.hpp"

namespace idc {

// Constant alpha when start == end, otherwise a linear ramp over the run.
struct AlphaSchedule {
  double start = 0.2;
  double end = 0.2;

  double At(std::int64_t step, std::int64_t total_steps) const;
  bool operator==(const AlphaSchedule&) const = default;
};

struct TrainConfig {
  DatasetSpec data;
  std::int64_t batch_size = 64;
  double learning_rate = 1e-4;
  std::int64_t steps = 5000;
  AlphaSchedule alpha;
  std::optional<double> inter_hinge;
  std::int64_t num_steps = 4;  // T_s
  double s_max = 1.0;
  PredictorConfig predictor;
  std::uint64_t seed = 0;
  std::optional<double> ema_decay;
  bool augment = false;  // random horizontal flips
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::int64_t log_every = 50;
  std::string output_dir;

  void Validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainRecord {
  std::int64_t step = 0;  // optimizer steps completed after this record
  double alpha = 0.0;
  double total = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double margin = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything needed to continue a run bit-for-bit.
struct TrainState {
  TrainConfig config;
  LabelCodebook codebook;
  BridgeSchedule schedule;
  std::shared_ptr<UNetPredictor> predictor;
  std::shared_ptr<UNetPredictor> ema;  // null unless config.ema_decay is set
  std::unique_ptr<torch::optim::Adam> optimizer;
  std::int64_t step = 0;
  torch::Generator gen;
};

// Fresh state for `config`; the codebook follows the data's class count and
// image shape.
TrainState init_train_state(const TrainConfig& config, const Dataset& data);

// Runs optimizer steps until state.step == until_step. A non-finite loss
// saves `last_good.ckpt` (when an output directory is configured) and throws
// TrainingError.
std::vector<TrainRecord> run_training(
    TrainState& state, const Dataset& data, std::int64_t until_step,
    const std::function<void(const TrainRecord&)>& on_record = {});

// Full run: load data, train config.steps steps, write checkpoints, the loss
// log and the config echo into config.output_dir when it is set.
TrainState train(const TrainConfig& config,
                 std::vector<TrainRecord>* history = nullptr);

// Continue a checkpointed run up to its configured step count.
TrainState resume_training(const std::string& checkpoint_path,
                           std::vector<TrainRecord>* history = nullptr,
                           std::optional<std::int64_t> until_step = std::nullopt);

// Inference bundle sharing the state's predictor (EMA weights when present).
ClassifierBundle MakeBundle(const TrainState& state, double tau = 0.1);

}  // namespace idc

#endif  // IDC_TRAIN_HPP_

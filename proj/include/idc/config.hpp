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

// JSON mapping of the configuration types. The key tree mirrors the structs:
//
//   {
//     "data": {"name": "shapes-4", "path": "", "split": "train",
//              "classes": [], "resolution": 16, "num_samples": 0, "seed": 0},
//     "batch_size": 64, "learning_rate": 1e-4, "steps": 5000,
//     "alpha": {"start": 0.2, "end": 0.2}, "inter_hinge": null,
//     "num_steps": 4, "s_max": 1.0,
//     "predictor": {"model_channels": 64, "channel_multipliers": [1, 4],
//                   "res_blocks": 1, "in_channels": 3, "out_channels": 3,
//                   "base_resolution": 32, "num_timesteps": 4,
//                   "head_channels": 64},
//     "seed": 0, "ema_decay": null, "augment": false,
//     "checkpoint_every": 0, "log_every": 50, "output_dir": ""
//   }
//
// Missing keys keep their defaults; unknown keys are rejected.

#ifndef IDC_CONFIG_HPP_
#define IDC_CONFIG_HPP_

#include <string>

#include "json.hpp"

#include "idc/attacks.hpp"
#include "idc/dataset.hpp"
#include "idc/predictor.hpp"
#include "idc/train.hpp"

namespace idc {

using Json = nlohmann::ordered_json;

Json ToJson(const PredictorConfig& c);
Json ToJson(const DatasetSpec& c);
Json ToJson(const TrainConfig& c);
Json ToJson(const AttackConfig& c);
Json ToJson(const EvalReport& r, bool include_records);
Json ToJson(const SampleRecord& r);

// Overlay `j` onto `base`; throws std::invalid_argument on unknown keys or
// wrongly typed values.
PredictorConfig PredictorConfigFromJson(const Json& j, PredictorConfig base = {});
DatasetSpec DatasetSpecFromJson(const Json& j, DatasetSpec base = {});
TrainConfig TrainConfigFromJson(const Json& j, TrainConfig base = {});

TrainConfig LoadTrainConfigFile(const std::string& path);

}  // namespace idc

#endif  // IDC_CONFIG_HPP_

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

#include "idc/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace idc {
namespace {

void RejectUnknown(const Json& j, const std::set<std::string>& known,
                   const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void Read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw std::invalid_argument(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void ReadOptional(const Json& j, const char* key, std::optional<T>& out,
                  const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T value{};
  Read(j, key, value, where);
  out = value;
}

template <typename T>
Json OptionalJson(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json ToJson(const PredictorConfig& c) {
  return Json{{"model_channels", c.model_channels},
              {"channel_multipliers", c.channel_multipliers},
              {"res_blocks", c.res_blocks},
              {"in_channels", c.in_channels},
              {"out_channels", c.out_channels},
              {"base_resolution", c.base_resolution},
              {"num_timesteps", c.num_timesteps},
              {"head_channels", c.head_channels}};
}

Json ToJson(const DatasetSpec& c) {
  return Json{{"name", c.name},       {"path", c.path},
              {"split", c.split},     {"classes", c.classes},
              {"resolution", c.resolution}, {"num_samples", c.num_samples},
              {"seed", c.seed}};
}

Json ToJson(const TrainConfig& c) {
  return Json{{"data", ToJson(c.data)},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"steps", c.steps},
              {"alpha", Json{{"start", c.alpha.start}, {"end", c.alpha.end}}},
              {"inter_hinge", OptionalJson(c.inter_hinge)},
              {"num_steps", c.num_steps},
              {"s_max", c.s_max},
              {"predictor", ToJson(c.predictor)},
              {"seed", c.seed},
              {"ema_decay", OptionalJson(c.ema_decay)},
              {"augment", c.augment},
              {"checkpoint_every", c.checkpoint_every},
              {"log_every", c.log_every},
              {"output_dir", c.output_dir}};
}

Json ToJson(const AttackConfig& c) {
  return Json{{"family", ToString(c.family)},
              {"epsilon", c.epsilon},
              {"steps", c.steps},
              {"step_size", c.step_size},
              {"eot_samples", c.eot_samples},
              {"gradient_mode", ToString(c.gradient_mode)},
              {"momentum_decay", c.momentum_decay},
              {"random_start", c.random_start},
              {"seed", c.seed}};
}

Json ToJson(const SampleRecord& r) {
  return Json{{"index", r.index},
              {"true_class", r.true_class},
              {"clean_prediction", r.clean_prediction},
              {"adversarial_prediction", r.adversarial_prediction},
              {"linf", r.linf},
              {"in_range", r.in_range},
              {"attacked", r.attacked}};
}

Json ToJson(const EvalReport& r, bool include_records) {
  Json j{{"clean_accuracy", r.clean_accuracy},
         {"robust_accuracy", r.robust_accuracy},
         {"n_samples", r.n_samples},
         {"attack", ToJson(r.attack)},
         {"predictor_eval_count", r.predictor_eval_count},
         {"predictor_calls", r.predictor_calls},
         {"max_linf", r.max_linf},
         {"all_in_range", r.all_in_range}};
  if (include_records) {
    Json records = Json::array();
    for (const auto& rec : r.records) records.push_back(ToJson(rec));
    j["records"] = std::move(records);
  }
  return j;
}

PredictorConfig PredictorConfigFromJson(const Json& j, PredictorConfig c) {
  const std::string where = "predictor";
  RejectUnknown(j, {"model_channels", "channel_multipliers", "res_blocks", "in_channels",
                    "out_channels", "base_resolution", "num_timesteps", "head_channels"},
                where);
  Read(j, "model_channels", c.model_channels, where);
  Read(j, "channel_multipliers", c.channel_multipliers, where);
  Read(j, "res_blocks", c.res_blocks, where);
  Read(j, "in_channels", c.in_channels, where);
  Read(j, "out_channels", c.out_channels, where);
  Read(j, "base_resolution", c.base_resolution, where);
  Read(j, "num_timesteps", c.num_timesteps, where);
  Read(j, "head_channels", c.head_channels, where);
  return c;
}

DatasetSpec DatasetSpecFromJson(const Json& j, DatasetSpec c) {
  const std::string where = "data";
  RejectUnknown(j, {"name", "path", "split", "classes", "resolution", "num_samples", "seed"},
                where);
  Read(j, "name", c.name, where);
  Read(j, "path", c.path, where);
  Read(j, "split", c.split, where);
  Read(j, "classes", c.classes, where);
  Read(j, "resolution", c.resolution, where);
  Read(j, "num_samples", c.num_samples, where);
  Read(j, "seed", c.seed, where);
  return c;
}

TrainConfig TrainConfigFromJson(const Json& j, TrainConfig c) {
  const std::string where = "train";
  RejectUnknown(j, {"data", "batch_size", "learning_rate", "steps", "alpha", "inter_hinge",
                    "num_steps", "s_max", "predictor", "seed", "ema_decay", "augment",
                    "checkpoint_every", "log_every", "output_dir"},
                where);
  if (j.contains("data")) c.data = DatasetSpecFromJson(j.at("data"), c.data);
  if (j.contains("predictor")) c.predictor = PredictorConfigFromJson(j.at("predictor"), c.predictor);
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    if (a.is_number()) {
      c.alpha.start = c.alpha.end = a.get<double>();
    } else {
      RejectUnknown(a, {"start", "end"}, "train.alpha");
      Read(a, "start", c.alpha.start, "train.alpha");
      Read(a, "end", c.alpha.end, "train.alpha");
    }
  }
  Read(j, "batch_size", c.batch_size, where);
  Read(j, "learning_rate", c.learning_rate, where);
  Read(j, "steps", c.steps, where);
  ReadOptional(j, "inter_hinge", c.inter_hinge, where);
  Read(j, "num_steps", c.num_steps, where);
  Read(j, "s_max", c.s_max, where);
  Read(j, "seed", c.seed, where);
  ReadOptional(j, "ema_decay", c.ema_decay, where);
  Read(j, "augment", c.augment, where);
  Read(j, "checkpoint_every", c.checkpoint_every, where);
  Read(j, "log_every", c.log_every, where);
  Read(j, "output_dir", c.output_dir, where);
  return c;
}

TrainConfig LoadTrainConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw std::invalid_argument("config file " + path + ": " + e.what());
  }
  return TrainConfigFromJson(j);
}

}  // namespace idc

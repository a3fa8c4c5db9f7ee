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

#include "idc/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "idc/checkpoint.hpp"
#include "idc/config.hpp"
#include "idc/util.hpp"

namespace idc {
namespace {

namespace fs = std::filesystem;

// Row order of one epoch; depends only on (seed, epoch) so a resumed run
// visits the same batches.
torch::Tensor EpochOrder(std::uint64_t seed, std::int64_t epoch, std::int64_t n) {
  auto gen = MakeGenerator(Fnv1a("epoch/" + std::to_string(seed) + "/" + std::to_string(epoch)));
  return torch::randperm(n, gen, torch::TensorOptions().dtype(torch::kInt64));
}

Json RecordJson(const TrainRecord& r) {
  return Json{{"step", r.step},   {"alpha", r.alpha}, {"total", r.total},
              {"intra", r.intra}, {"inter", r.inter}, {"margin", r.margin}};
}

void EmaUpdate(UNetPredictor& ema, const UNetPredictor& model, double decay) {
  torch::NoGradGuard no_grad;
  auto dst = ema.parameters();
  auto src = model.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i].mul_(decay).add_(src[i], 1.0 - decay);
  }
}

void CopyWeights(UNetPredictor& dst, const UNetPredictor& src) {
  torch::NoGradGuard no_grad;
  auto d = dst.parameters();
  auto s = src.parameters();
  for (std::size_t i = 0; i < d.size(); ++i) d[i].copy_(s[i]);
}

}  // namespace

double AlphaSchedule::At(std::int64_t step, std::int64_t total_steps) const {
  if (start == end || total_steps <= 1) return start;
  const double frac =
      std::clamp(static_cast<double>(step) / static_cast<double>(total_steps - 1), 0.0, 1.0);
  return start + (end - start) * frac;
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (batch_size <= 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (steps < 0) fail("steps must be >= 0");
  if (alpha.start < 0.0 || alpha.end < 0.0) fail("alpha endpoints must be >= 0");
  if (inter_hinge && !(*inter_hinge > 0.0)) fail("inter_hinge must be positive");
  if (num_steps < 2) fail("num_steps must be >= 2");
  if (!(s_max > 0.0)) fail("s_max must be positive");
  if (ema_decay && !(*ema_decay >= 0.0 && *ema_decay < 1.0)) fail("ema_decay must be in [0,1)");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (log_every < 0) fail("log_every must be >= 0");
  predictor.Validate();
}

TrainState init_train_state(const TrainConfig& config, const Dataset& data) {
  TrainState state;
  state.config = config;
  // The predictor's shape contract follows the data and the schedule length.
  const auto shape = data.shape();
  if (shape.height != shape.width) {
    throw std::invalid_argument("training needs square images");
  }
  auto& pc = state.config.predictor;
  pc.in_channels = pc.out_channels = shape.channels;
  pc.base_resolution = shape.height;
  pc.num_timesteps = state.config.num_steps;
  state.config.Validate();

  state.codebook = generate_codebook(data.num_classes, shape, data.data_range, config.seed);
  state.schedule = build_schedule(config.num_steps, config.s_max);
  state.predictor = build_predictor(pc, config.seed);
  if (config.ema_decay) {
    state.ema = build_predictor(pc, config.seed);
    CopyWeights(*state.ema, *state.predictor);
  }
  state.optimizer = std::make_unique<torch::optim::Adam>(
      state.predictor->parameters(), torch::optim::AdamOptions(config.learning_rate));
  state.step = 0;
  state.gen = MakeGenerator(Fnv1a("train/" + std::to_string(config.seed)));
  return state;
}

std::vector<TrainRecord> run_training(TrainState& state, const Dataset& data,
                                      std::int64_t until_step,
                                      const std::function<void(const TrainRecord&)>& on_record) {
  const auto& cfg = state.config;
  const std::int64_t n = data.size();
  if (n == 0) throw std::invalid_argument("run_training: empty dataset");
  const std::int64_t batch = std::min(cfg.batch_size, n);
  const std::int64_t per_epoch = n / batch;
  auto labels_all = torch::tensor(data.labels, torch::TensorOptions().dtype(torch::kInt64));

  std::vector<TrainRecord> records;
  std::int64_t cached_epoch = -1;
  torch::Tensor order;
  state.predictor->net()->train();
  while (state.step < until_step) {
    const std::int64_t epoch = state.step / per_epoch;
    if (epoch != cached_epoch) {
      order = EpochOrder(cfg.seed, epoch, n);
      cached_epoch = epoch;
    }
    const std::int64_t pos = (state.step % per_epoch) * batch;
    auto idx = order.slice(0, pos, pos + batch);
    auto x = data.images.index_select(0, idx);
    auto y = labels_all.index_select(0, idx);
    std::vector<std::int64_t> classes(y.data_ptr<std::int64_t>(),
                                      y.data_ptr<std::int64_t>() + batch);
    if (cfg.augment) {
      auto flip = torch::rand({batch}, state.gen) < 0.5;
      x = torch::where(flip.view({batch, 1, 1, 1}), x.flip({3}), x);
    }

    LossOptions options;
    options.alpha = cfg.alpha.At(state.step, cfg.steps);
    options.inter_hinge = cfg.inter_hinge;
    // Saved before the draws of this step so the file resumes at this step.
    const auto gen_before = state.gen.get_state();
    auto terms = classification_loss(state.schedule, *state.predictor, x, classes,
                                      state.codebook, options, state.gen);
    const double total = terms.total.item<double>();
    if (!std::isfinite(total)) {
      std::string where;
      if (!cfg.output_dir.empty()) {
        state.gen.set_state(gen_before);
        const auto path = (fs::path(cfg.output_dir) / "last_good.ckpt").string();
        save_checkpoint(state, path);
        where = "; last good state saved to " + path;
      }
      throw TrainingError("non-finite loss at step " + std::to_string(state.step) + where);
    }
    state.optimizer->zero_grad();
    terms.total.backward();
    state.optimizer->step();
    if (state.ema) EmaUpdate(*state.ema, *state.predictor, *cfg.ema_decay);
    ++state.step;

    TrainRecord rec{state.step, options.alpha, total, terms.intra, terms.inter, terms.margin};
    records.push_back(rec);
    if (on_record) on_record(rec);
  }
  state.predictor->net()->eval();
  return records;
}

namespace {

void PrepareOutput(const TrainConfig& cfg) {
  if (cfg.output_dir.empty()) return;
  fs::create_directories(cfg.output_dir);
  Json echo{{"version", std::string(kVersionTag)},
            {"seed", cfg.seed},
            {"config", ToJson(cfg)}};
  std::ofstream out(fs::path(cfg.output_dir) / "config.json");
  out << echo.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write config echo into " + cfg.output_dir);
}

std::vector<TrainRecord> TrainWithLogging(TrainState& state, const Dataset& data,
                                          std::int64_t until_step, bool append) {
  const auto& cfg = state.config;
  std::ofstream log;
  if (!cfg.output_dir.empty()) {
    log.open(fs::path(cfg.output_dir) / "train_log.jsonl",
             append ? std::ios::app : std::ios::trunc);
    if (!log) throw std::runtime_error("cannot open training log in " + cfg.output_dir);
  }
  auto on_record = [&](const TrainRecord& r) {
    const bool last = r.step == until_step;
    if (log.is_open() && (last || (cfg.log_every > 0 && r.step % cfg.log_every == 0))) {
      log << RecordJson(r).dump() << "\n";
      log.flush();
    }
    if (!cfg.output_dir.empty() && cfg.checkpoint_every > 0 && !last &&
        r.step % cfg.checkpoint_every == 0) {
      save_checkpoint(state, (fs::path(cfg.output_dir) /
                              ("step_" + std::to_string(r.step) + ".ckpt")).string());
    }
  };
  auto records = run_training(state, data, until_step, on_record);
  if (!cfg.output_dir.empty()) {
    save_checkpoint(state, (fs::path(cfg.output_dir) / "final.ckpt").string());
  }
  return records;
}

}  // namespace

TrainState train(const TrainConfig& config, std::vector<TrainRecord>* history) {
  config.Validate();
  auto data = load_dataset(config.data);
  auto state = init_train_state(config, data);
  PrepareOutput(state.config);
  auto records = TrainWithLogging(state, data, state.config.steps, false);
  if (history) *history = std::move(records);
  return state;
}

TrainState resume_training(const std::string& checkpoint_path,
                           std::vector<TrainRecord>* history,
                           std::optional<std::int64_t> until_step) {
  auto state = load_checkpoint(checkpoint_path);
  auto data = load_dataset(state.config.data);
  const auto target = until_step.value_or(state.config.steps);
  if (target < state.step) {
    throw std::invalid_argument("resume target step " + std::to_string(target) +
                                " is before the checkpoint step " + std::to_string(state.step));
  }
  if (!state.config.output_dir.empty()) fs::create_directories(state.config.output_dir);
  auto records = TrainWithLogging(state, data, target, true);
  if (history) *history = std::move(records);
  return state;
}

ClassifierBundle MakeBundle(const TrainState& state, double tau) {
  ClassifierBundle bundle;
  bundle.schedule = state.schedule;
  bundle.predictor = state.ema ? state.ema : state.predictor;
  bundle.codebook = state.codebook;
  bundle.tau = tau;
  bundle.Validate();
  return bundle;
}

}  // namespace idc

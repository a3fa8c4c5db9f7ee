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

#include "idc/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "idc/config.hpp"
#include "idc/util.hpp"

namespace idc {
namespace {

constexpr char kMagic[8] = {'I', 'D', 'C', 'C', 'K', 'P', 'T', '\0'};
constexpr char kEndMagic[8] = {'I', 'D', 'C', 'E', 'N', 'D', '\0', '\0'};
constexpr const char* kContext = "checkpoint";

void PutWeights(BinaryWriter& w, const UNetPredictor& p) {
  const auto named = p.net()->named_parameters();
  w.Put<std::uint64_t>(named.size());
  for (const auto& item : named) {
    w.PutBytes(item.key());
    w.PutTensor(item.value().detach());
  }
}

void GetWeights(BinaryReader& r, UNetPredictor& p) {
  torch::NoGradGuard no_grad;
  auto named = p.net()->named_parameters();
  const auto count = r.Get<std::uint64_t>();
  if (count != named.size()) {
    throw CheckpointMismatch("checkpoint holds " + std::to_string(count) +
                             " weight tensors, the configured predictor has " +
                             std::to_string(named.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name = r.GetBytes(4096);
    auto value = r.GetTensor();
    auto* target = named.find(name);
    if (target == nullptr) {
      throw CheckpointMismatch("checkpoint weight '" + name + "' is not in the predictor");
    }
    if (target->sizes() != value.sizes() || target->scalar_type() != value.scalar_type()) {
      throw CheckpointMismatch("checkpoint weight '" + name + "' has shape " +
                               ShapeString(value) + ", predictor expects " +
                               ShapeString(*target));
    }
    target->copy_(value);
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, std::ostream& out) {
  BinaryWriter w(out);
  w.PutRaw(std::string_view(kMagic, sizeof(kMagic)));
  w.Put<std::uint32_t>(kCheckpointVersion);

  Json header{{"version_tag", std::string(kVersionTag)},
              {"config", ToJson(state.config)},
              {"predictor_hash", state.config.predictor.Hash()},
              {"step", state.step},
              {"has_ema", static_cast<bool>(state.ema)}};
  w.PutBytes(header.dump());
  SaveCodebook(state.codebook, out);
  SaveSchedule(state.schedule, out);
  PutWeights(w, *state.predictor);
  if (state.ema) PutWeights(w, *state.ema);

  std::ostringstream opt;
  torch::serialize::OutputArchive archive;
  state.optimizer->save(archive);
  archive.save_to(opt);
  w.PutBytes(opt.str());

  auto gen = state.gen;
  w.PutTensor(gen.get_state());
  w.PutRaw(std::string_view(kEndMagic, sizeof(kEndMagic)));
  if (!w.ok()) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  // Write beside the target and rename, so a failed write never clobbers the
  // previous file.
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    std::string cause;
    try {
      save_checkpoint(state, out);
      out.flush();
      if (!out) cause = "stream error";
    } catch (const std::runtime_error& e) {
      cause = e.what();
    }
    if (!cause.empty()) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("writing checkpoint " + path + " failed (disk full?): " + cause);
    }
  }
  fs::rename(tmp, target);
}

TrainState load_checkpoint(std::istream& in, const PredictorConfig* expected) {
  BinaryReader r(in, kContext);
  if (r.GetRaw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("checkpoint: bad magic, not an IDC checkpoint");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: format version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
  }

  Json header;
  try {
    header = Json::parse(r.GetBytes(1 << 24));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: corrupt header: ") + e.what());
  }
  TrainState state;
  state.config = TrainConfigFromJson(header.at("config"));
  const auto stored_hash = header.at("predictor_hash").get<std::uint64_t>();
  if (stored_hash != state.config.predictor.Hash()) {
    throw CheckpointMismatch("checkpoint: predictor config does not match its stored hash (" +
                             state.config.predictor.Canonical() + ")");
  }
  if (expected && !(*expected == state.config.predictor)) {
    throw CheckpointMismatch("checkpoint: predictor config " + state.config.predictor.Canonical() +
                             " differs from the expected " + expected->Canonical());
  }
  state.step = header.at("step").get<std::int64_t>();
  const bool has_ema = header.at("has_ema").get<bool>();

  state.codebook = LoadCodebook(in);
  state.schedule = LoadSchedule(in);
  state.predictor = build_predictor(state.config.predictor, state.config.seed);
  GetWeights(r, *state.predictor);
  if (has_ema) {
    state.ema = build_predictor(state.config.predictor, state.config.seed);
    GetWeights(r, *state.ema);
  }

  state.optimizer = std::make_unique<torch::optim::Adam>(
      state.predictor->parameters(), torch::optim::AdamOptions(state.config.learning_rate));
  {
    std::istringstream opt(r.GetBytes());
    torch::serialize::InputArchive archive;
    try {
      archive.load_from(opt);
      state.optimizer->load(archive);
    } catch (const c10::Error& e) {
      throw FormatError(std::string("checkpoint: corrupt optimizer state: ") + e.what_without_backtrace());
    }
  }
  state.gen = MakeGenerator(0);
  state.gen.set_state(r.GetTensor());
  if (r.GetRaw(sizeof(kEndMagic)) != std::string(kEndMagic, sizeof(kEndMagic))) r.Truncated();
  state.predictor->net()->eval();
  return state;
}

TrainState load_checkpoint(const std::string& path, const PredictorConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return load_checkpoint(in, expected);
}

}  // namespace idc

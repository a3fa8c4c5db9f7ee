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

#ifndef IDC_PREDICTOR_HPP_
#define IDC_PREDICTOR_HPP_

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace idc {

// Noise predictor interface eps(y_t, t). Every call is counted so callers can
// verify how many network evaluations an inference path performs.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  // y_t: [B, C, H, W]; t: [B] int64 timesteps in 1..T_s.
  torch::Tensor operator()(const torch::Tensor& y_t, const torch::Tensor& t) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    samples_.fetch_add(y_t.size(0), std::memory_order_relaxed);
    return Forward(y_t, t);
  }

  std::int64_t calls() const { return calls_.load(std::memory_order_relaxed); }
  std::int64_t evaluated_samples() const {
    return samples_.load(std::memory_order_relaxed);
  }
  void reset_counters() {
    calls_.store(0);
    samples_.store(0);
  }

 protected:
  virtual torch::Tensor Forward(const torch::Tensor& y_t,
                                const torch::Tensor& t) = 0;

 private:
  std::atomic<std::int64_t> calls_{0};
  std::atomic<std::int64_t> samples_{0};
};

// Pruning knobs of the U-Net plus the shape contract.
struct PredictorConfig {
  std::int64_t model_channels = 64;                 // c_m
  std::vector<std::int64_t> channel_multipliers{1, 4};  // u
  std::int64_t res_blocks = 1;                      // n_R
  std::int64_t in_channels = 3;
  std::int64_t out_channels = 3;
  std::int64_t base_resolution = 32;
  std::int64_t num_timesteps = 4;                   // valid t range is 1..num_timesteps
  std::int64_t head_channels = 64;

  std::int64_t time_embed_dim() const { return 4 * model_channels; }

  // Throws std::invalid_argument when the knobs cannot form a U-Net.
  void Validate() const;

  // Canonical text form; the basis of the checkpoint config hash.
  std::string Canonical() const;
  std::uint64_t Hash() const;

  bool operator==(const PredictorConfig&) const = default;
};

// Number of trainable scalars of the network built from `config`, computed
// from the topology without instantiating it.
std::int64_t param_count(const PredictorConfig& config);

class ResBlockImpl : public torch::nn::Module {
 public:
  enum class Resample { kNone, kUp, kDown };

  ResBlockImpl(std::int64_t in_ch, std::int64_t out_ch, std::int64_t emb_dim,
               Resample resample = Resample::kNone);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emb);

 private:
  Resample resample_;
  torch::nn::GroupNorm in_norm_{nullptr};
  torch::nn::Conv2d in_conv_{nullptr};
  torch::nn::Linear emb_proj_{nullptr};
  torch::nn::GroupNorm out_norm_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
  torch::nn::Conv2d skip_{nullptr};
};
TORCH_MODULE(ResBlock);

class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(std::int64_t channels, std::int64_t head_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::int64_t heads_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Conv1d qkv_{nullptr};
  torch::nn::Conv1d proj_{nullptr};
};
TORCH_MODULE(AttentionBlock);

// Contracting path of len(u) levels with n_R residual blocks each and a
// resampling residual block between levels, a middle block with
// self-attention at the lowest resolution, and an expansive path mirroring
// the contracting path through skip concatenation.
class UNetImpl : public torch::nn::Module {
 public:
  explicit UNetImpl(const PredictorConfig& config);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& t);

  const PredictorConfig& config() const { return config_; }

 private:
  struct Stage {
    ResBlock block{nullptr};
    bool down = false;
  };
  struct UpStage {
    ResBlock block{nullptr};
    ResBlock upsample{nullptr};
  };

  PredictorConfig config_;
  torch::nn::Sequential time_mlp_{nullptr};
  torch::nn::Conv2d in_conv_{nullptr};
  std::vector<Stage> down_;
  ResBlock mid_first_{nullptr};
  AttentionBlock mid_attn_{nullptr};
  ResBlock mid_second_{nullptr};
  std::vector<UpStage> up_;
  torch::nn::GroupNorm out_norm_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(UNet);

// Sinusoidal embedding of integer timesteps, [B] -> [B, dim].
torch::Tensor timestep_embedding(const torch::Tensor& t, std::int64_t dim);

// The trainable predictor: a U-Net behind the counted interface.
class UNetPredictor : public NoisePredictor {
 public:
  UNetPredictor(const PredictorConfig& config, std::uint64_t seed);

  UNet& net() { return net_; }
  const UNet& net() const { return net_; }
  const PredictorConfig& config() const { return config_; }

  std::vector<torch::Tensor> parameters() const { return net_->parameters(); }

 protected:
  torch::Tensor Forward(const torch::Tensor& y_t,
                        const torch::Tensor& t) override;

 private:
  PredictorConfig config_;
  UNet net_{nullptr};
};

std::shared_ptr<UNetPredictor> build_predictor(const PredictorConfig& config,
                                               std::uint64_t seed);

// Checks the shape/timestep contract, then evaluates the predictor.
torch::Tensor predict_eps(UNetPredictor& predictor, const torch::Tensor& y_t,
                          const torch::Tensor& t);

}  // namespace idc

#endif  // IDC_PREDICTOR_HPP_

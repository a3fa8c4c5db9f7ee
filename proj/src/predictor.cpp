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

#include "idc/predictor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "idc/util.hpp"

namespace idc {
namespace {

namespace nn = torch::nn;

std::int64_t NormGroups(std::int64_t channels) {
  return std::gcd<std::int64_t>(32, channels);
}

nn::GroupNorm Norm(std::int64_t channels) {
  return nn::GroupNorm(nn::GroupNormOptions(NormGroups(channels), channels));
}

nn::Conv2d Conv3x3(std::int64_t in, std::int64_t out) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1));
}

// Scalar counts for the analytic parameter tally.
std::int64_t ConvCount(std::int64_t in, std::int64_t out, std::int64_t k) {
  return in * out * k * k + out;
}
std::int64_t LinearCount(std::int64_t in, std::int64_t out) {
  return in * out + out;
}
std::int64_t NormCount(std::int64_t ch) { return 2 * ch; }

std::int64_t ResBlockCount(std::int64_t in, std::int64_t out,
                           std::int64_t emb) {
  std::int64_t n = NormCount(in) + ConvCount(in, out, 3) +
                   LinearCount(emb, 2 * out) + NormCount(out) +
                   ConvCount(out, out, 3);
  if (in != out) n += ConvCount(in, out, 1);
  return n;
}

std::int64_t AttentionCount(std::int64_t ch) {
  return NormCount(ch) + ConvCount(ch, 3 * ch, 1) + ConvCount(ch, ch, 1);
}

}  // namespace

void PredictorConfig::Validate() const {
  if (model_channels < 1) {
    throw std::invalid_argument("model_channels must be positive");
  }
  if (channel_multipliers.empty()) {
    throw std::invalid_argument("channel_multipliers must be non-empty");
  }
  for (std::size_t i = 0; i < channel_multipliers.size(); ++i) {
    if (channel_multipliers[i] < 1) {
      throw std::invalid_argument("channel multipliers must be positive");
    }
    if (i > 0 && channel_multipliers[i] < channel_multipliers[i - 1]) {
      throw std::invalid_argument("channel multipliers must be non-decreasing");
    }
  }
  if (res_blocks < 1) throw std::invalid_argument("res_blocks must be >= 1");
  if (in_channels < 1 || out_channels < 1) {
    throw std::invalid_argument("channel counts must be positive");
  }
  if (num_timesteps < 1) {
    throw std::invalid_argument("num_timesteps must be positive");
  }
  if (head_channels < 1) {
    throw std::invalid_argument("head_channels must be positive");
  }
  const std::int64_t factor = std::int64_t{1}
                              << (channel_multipliers.size() - 1);
  if (base_resolution < 1 || base_resolution % factor != 0) {
    std::ostringstream os;
    os << "base_resolution " << base_resolution << " is not divisible by "
       << factor << " (2^(len(u)-1))";
    throw std::invalid_argument(os.str());
  }
}

std::string PredictorConfig::Canonical() const {
  std::ostringstream os;
  os << "cm=" << model_channels << ";u=";
  for (std::size_t i = 0; i < channel_multipliers.size(); ++i) {
    os << (i ? "," : "") << channel_multipliers[i];
  }
  os << ";nr=" << res_blocks << ";in=" << in_channels
     << ";out=" << out_channels << ";res=" << base_resolution
     << ";T=" << num_timesteps << ";hc=" << head_channels;
  return os.str();
}

std::uint64_t PredictorConfig::Hash() const { return Fnv1a(Canonical()); }

std::int64_t param_count(const PredictorConfig& config) {
  config.Validate();
  const std::int64_t mc = config.model_channels;
  const std::int64_t emb = config.time_embed_dim();
  const auto& mult = config.channel_multipliers;
  const std::size_t levels = mult.size();

  std::int64_t n = LinearCount(mc, emb) + LinearCount(emb, emb);
  n += ConvCount(config.in_channels, mc, 3);
  std::int64_t ch = mc;
  std::vector<std::int64_t> skips{ch};
  for (std::size_t level = 0; level < levels; ++level) {
    for (std::int64_t r = 0; r < config.res_blocks; ++r) {
      n += ResBlockCount(ch, mult[level] * mc, emb);
      ch = mult[level] * mc;
      skips.push_back(ch);
    }
    if (level + 1 != levels) {
      n += ResBlockCount(ch, ch, emb);
      skips.push_back(ch);
    }
  }
  n += 2 * ResBlockCount(ch, ch, emb) + AttentionCount(ch);
  for (std::size_t level = levels; level-- > 0;) {
    for (std::int64_t r = 0; r <= config.res_blocks; ++r) {
      const std::int64_t skip = skips.back();
      skips.pop_back();
      n += ResBlockCount(ch + skip, mult[level] * mc, emb);
      ch = mult[level] * mc;
      if (level > 0 && r == config.res_blocks) n += ResBlockCount(ch, ch, emb);
    }
  }
  n += NormCount(ch) + ConvCount(mc, config.out_channels, 3);
  return n;
}

torch::Tensor timestep_embedding(const torch::Tensor& t, std::int64_t dim) {
  const std::int64_t half = dim / 2;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto freqs = torch::exp(-std::log(10000.0) *
                          torch::arange(half, opts) / static_cast<double>(half));
  auto args = t.to(torch::kFloat64).unsqueeze(1) * freqs.unsqueeze(0);
  auto emb = torch::cat({torch::cos(args), torch::sin(args)}, 1);
  if (dim % 2 == 1) {
    emb = torch::cat({emb, torch::zeros({emb.size(0), 1}, opts)}, 1);
  }
  return emb;
}

ResBlockImpl::ResBlockImpl(std::int64_t in_ch, std::int64_t out_ch,
                           std::int64_t emb_dim, Resample resample)
    : resample_(resample) {
  in_norm_ = register_module("in_norm", Norm(in_ch));
  in_conv_ = register_module("in_conv", Conv3x3(in_ch, out_ch));
  emb_proj_ = register_module("emb_proj", nn::Linear(emb_dim, 2 * out_ch));
  out_norm_ = register_module("out_norm", Norm(out_ch));
  out_conv_ = register_module("out_conv", Conv3x3(out_ch, out_ch));
  if (in_ch != out_ch) {
    skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in_ch, out_ch, 1)));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x,
                                    const torch::Tensor& emb) {
  auto h = torch::silu(in_norm_(x));
  auto skip = x;
  if (resample_ == Resample::kDown) {
    h = torch::avg_pool2d(h, 2);
    skip = torch::avg_pool2d(skip, 2);
  } else if (resample_ == Resample::kUp) {
    namespace F = torch::nn::functional;
    auto up = F::InterpolateFuncOptions()
                  .scale_factor(std::vector<double>{2.0, 2.0})
                  .mode(torch::kNearest);
    h = F::interpolate(h, up);
    skip = F::interpolate(skip, up);
  }
  h = in_conv_(h);
  auto scale_shift = emb_proj_(torch::silu(emb)).unsqueeze(-1).unsqueeze(-1);
  auto parts = scale_shift.chunk(2, 1);
  h = out_norm_(h) * (1 + parts[0]) + parts[1];
  h = out_conv_(torch::silu(h));
  if (skip_) skip = skip_(skip);
  return skip + h;
}

AttentionBlockImpl::AttentionBlockImpl(std::int64_t channels,
                                       std::int64_t head_channels)
    : heads_(std::max<std::int64_t>(1, channels / head_channels)) {
  if (channels % heads_ != 0) heads_ = 1;
  norm_ = register_module("norm", Norm(channels));
  qkv_ = register_module("qkv", nn::Conv1d(nn::Conv1dOptions(channels, 3 * channels, 1)));
  proj_ = register_module("proj", nn::Conv1d(nn::Conv1dOptions(channels, channels, 1)));
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1);
  auto flat = x.reshape({b, c, -1});
  const auto len = flat.size(2);
  const auto hc = c / heads_;
  auto qkv = qkv_(norm_(x).reshape({b, c, -1})).reshape({b * heads_, 3 * hc, len});
  auto parts = qkv.split(hc, 1);
  const double scale = 1.0 / std::sqrt(std::sqrt(static_cast<double>(hc)));
  auto weight = torch::einsum("bct,bcs->bts", {parts[0] * scale, parts[1] * scale});
  weight = torch::softmax(weight, -1);
  auto out = torch::einsum("bts,bcs->bct", {weight, parts[2]}).reshape({b, c, len});
  return (flat + proj_(out)).reshape(x.sizes());
}

UNetImpl::UNetImpl(const PredictorConfig& config) : config_(config) {
  config_.Validate();
  const std::int64_t mc = config_.model_channels;
  const std::int64_t emb = config_.time_embed_dim();
  const auto& mult = config_.channel_multipliers;
  const std::size_t levels = mult.size();

  time_mlp_ = register_module(
      "time_mlp", nn::Sequential(nn::Linear(mc, emb), nn::SiLU(), nn::Linear(emb, emb)));
  in_conv_ = register_module("in_conv", Conv3x3(config_.in_channels, mc));

  std::int64_t ch = mc;
  std::vector<std::int64_t> skips{ch};
  int idx = 0;
  for (std::size_t level = 0; level < levels; ++level) {
    for (std::int64_t r = 0; r < config_.res_blocks; ++r) {
      const std::int64_t out = mult[level] * mc;
      Stage s{ResBlock(ch, out, emb), false};
      register_module("down" + std::to_string(idx++), s.block);
      down_.push_back(s);
      ch = out;
      skips.push_back(ch);
    }
    if (level + 1 != levels) {
      Stage s{ResBlock(ch, ch, emb, ResBlockImpl::Resample::kDown), true};
      register_module("down" + std::to_string(idx++), s.block);
      down_.push_back(s);
      skips.push_back(ch);
    }
  }

  mid_first_ = register_module("mid_first", ResBlock(ch, ch, emb));
  mid_attn_ = register_module("mid_attn", AttentionBlock(ch, config_.head_channels));
  mid_second_ = register_module("mid_second", ResBlock(ch, ch, emb));

  idx = 0;
  for (std::size_t level = levels; level-- > 0;) {
    for (std::int64_t r = 0; r <= config_.res_blocks; ++r) {
      const std::int64_t skip = skips.back();
      skips.pop_back();
      const std::int64_t out = mult[level] * mc;
      UpStage s;
      s.block = register_module("up" + std::to_string(idx),
                                ResBlock(ch + skip, out, emb));
      ch = out;
      if (level > 0 && r == config_.res_blocks) {
        s.upsample = register_module("upsample" + std::to_string(idx),
                                     ResBlock(ch, ch, emb, ResBlockImpl::Resample::kUp));
      }
      up_.push_back(s);
      ++idx;
    }
  }
  out_norm_ = register_module("out_norm", Norm(ch));
  out_conv_ = register_module("out_conv", Conv3x3(mc, config_.out_channels));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x, const torch::Tensor& t) {
  auto emb = time_mlp_->forward(
      timestep_embedding(t, config_.model_channels).to(x.scalar_type()));
  std::vector<torch::Tensor> hs;
  auto h = in_conv_(x);
  hs.push_back(h);
  for (auto& s : down_) {
    h = s.block->forward(h, emb);
    hs.push_back(h);
  }
  h = mid_first_->forward(h, emb);
  h = mid_attn_->forward(h);
  h = mid_second_->forward(h, emb);
  for (auto& s : up_) {
    h = torch::cat({h, hs.back()}, 1);
    hs.pop_back();
    h = s.block->forward(h, emb);
    if (s.upsample) h = s.upsample->forward(h, emb);
  }
  return out_conv_(torch::silu(out_norm_(h)));
}

UNetPredictor::UNetPredictor(const PredictorConfig& config, std::uint64_t seed)
    : config_(config), net_(config) {
  torch::NoGradGuard no_grad;
  auto gen = MakeGenerator(seed);
  // Uniform(+-1/sqrt(fan_in)) for every affine weight and bias, identity for
  // norms; the final projection starts at zero so the untrained predictor
  // outputs exactly zero.
  for (auto& item : net_->named_modules()) {
    auto& mod = item.value();
    if (auto* conv = mod->as<nn::Conv2d>()) {
      const double fan_in = conv->weight.numel() / conv->weight.size(0);
      const double bound = 1.0 / std::sqrt(fan_in);
      conv->weight.uniform_(-bound, bound, gen);
      if (conv->bias.defined()) conv->bias.uniform_(-bound, bound, gen);
    } else if (auto* conv1 = mod->as<nn::Conv1d>()) {
      const double fan_in = conv1->weight.numel() / conv1->weight.size(0);
      const double bound = 1.0 / std::sqrt(fan_in);
      conv1->weight.uniform_(-bound, bound, gen);
      conv1->bias.uniform_(-bound, bound, gen);
    } else if (auto* lin = mod->as<nn::Linear>()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(lin->weight.size(1)));
      lin->weight.uniform_(-bound, bound, gen);
      lin->bias.uniform_(-bound, bound, gen);
    }
  }
  for (auto& item : net_->named_parameters()) {
    const auto& name = item.key();
    if (name.rfind("out_conv.", 0) == 0) item.value().zero_();
  }
}

torch::Tensor UNetPredictor::Forward(const torch::Tensor& y_t,
                                     const torch::Tensor& t) {
  return net_->forward(y_t, t);
}

std::shared_ptr<UNetPredictor> build_predictor(const PredictorConfig& config,
                                               std::uint64_t seed) {
  config.Validate();
  return std::make_shared<UNetPredictor>(config, seed);
}

torch::Tensor predict_eps(UNetPredictor& predictor, const torch::Tensor& y_t,
                          const torch::Tensor& t) {
  const auto& cfg = predictor.config();
  if (y_t.dim() != 4 || y_t.size(1) != cfg.in_channels ||
      y_t.size(2) != cfg.base_resolution || y_t.size(3) != cfg.base_resolution) {
    throw std::invalid_argument("predict_eps: input shape " + ShapeString(y_t) +
                                " does not match predictor config");
  }
  if (t.dim() != 1 || t.size(0) != y_t.size(0)) {
    throw std::invalid_argument("predict_eps: expected one timestep per sample");
  }
  const auto lo = t.min().item<std::int64_t>();
  const auto hi = t.max().item<std::int64_t>();
  if (lo < 1 || hi > cfg.num_timesteps) {
    throw std::invalid_argument("predict_eps: timestep outside 1.." +
                                std::to_string(cfg.num_timesteps));
  }
  return predictor(y_t, t);
}

}  // namespace idc

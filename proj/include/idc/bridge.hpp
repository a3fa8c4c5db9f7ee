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

#ifndef IDC_BRIDGE_HPP_
#define IDC_BRIDGE_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "idc/codebook.hpp"
#include "idc/predictor.hpp"

namespace idc {

// Brownian-bridge schedule. Every table is indexed by timestep 0..T; entries
// that are undefined at a given step are stored as 0:
//   gamma, delta_cond      defined for t = 1..T
//   c_x, c_y, c_eps, post_var defined for t = 1..T-1
struct BridgeSchedule {
  std::int64_t num_steps = 0;
  double s_max = 1.0;
  std::vector<double> m;
  std::vector<double> delta;
  std::vector<double> gamma;
  std::vector<double> delta_cond;
  std::vector<double> c_x;
  std::vector<double> c_y;
  std::vector<double> c_eps;
  std::vector<double> post_var;

  bool operator==(const BridgeSchedule&) const = default;
};

// m_t = t/T and delta_t = 2 s_max m_t (1 - m_t).
BridgeSchedule build_schedule(std::int64_t num_steps = 4, double s_max = 1.0);

void SaveSchedule(const BridgeSchedule& schedule, std::ostream& out);
BridgeSchedule LoadSchedule(std::istream& in);

// y_t = (1 - m_t) y0 + m_t x + sqrt(delta_t) noise.
torch::Tensor forward_marginal(const BridgeSchedule& s, const torch::Tensor& y0,
                               const torch::Tensor& x, std::int64_t t,
                               const torch::Tensor& noise);
// Per-sample timesteps; t is [B] int64.
torch::Tensor forward_marginal(const BridgeSchedule& s, const torch::Tensor& y0,
                               const torch::Tensor& x, const torch::Tensor& t,
                               const torch::Tensor& noise);

// y_t ~ q(y_t | y_{t-1}, x), valid for 2 <= t <= T.
torch::Tensor forward_transition(const BridgeSchedule& s,
                                 const torch::Tensor& y_prev,
                                 const torch::Tensor& x, std::int64_t t,
                                 const torch::Tensor& noise);

// Mean of q(y_{t-1} | y_t, y0, x) in its y0 form, valid for 2 <= t <= T-1.
torch::Tensor true_posterior_mean(const BridgeSchedule& s,
                                  const torch::Tensor& y_t,
                                  const torch::Tensor& y0,
                                  const torch::Tensor& x, std::int64_t t);

// The predictor regresses y_t - y0, so y0_hat = y_t - eps_pred.
torch::Tensor predict_y0_onestep(const BridgeSchedule& s,
                                 const torch::Tensor& y_t,
                                 const torch::Tensor& eps_pred, std::int64_t t);

// One reverse step y_t -> y_{t-1}. `noise` is ignored at t = 1.
torch::Tensor reverse_step(const BridgeSchedule& s, const torch::Tensor& y_t,
                           const torch::Tensor& x,
                           const torch::Tensor& eps_pred, std::int64_t t,
                           const torch::Tensor& noise);

// Standard-normal draws consumed by one reverse chain, ordered t = T..2.
std::vector<torch::Tensor> draw_chain_noise(const BridgeSchedule& s,
                                            const torch::Tensor& x,
                                            torch::Generator& gen);

// Full reverse chain from y_T = x with the given noise. Exactly T predictor
// calls. Differentiable w.r.t. x and predictor parameters.
torch::Tensor sample_label(const BridgeSchedule& s, NoisePredictor& predictor,
                           const torch::Tensor& x,
                           const std::vector<torch::Tensor>& noise);
torch::Tensor sample_label(const BridgeSchedule& s, NoisePredictor& predictor,
                           const torch::Tensor& x, torch::Generator& gen);

// m_t (x - y0_i) + sqrt(delta_t) eps, which equals y_t - y0_i.
torch::Tensor intra_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i, std::int64_t t,
                           const torch::Tensor& eps);
torch::Tensor intra_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i, const torch::Tensor& t,
                           const torch::Tensor& eps);

// m_t (x - y0_j) + m_{t-1} (y0_j - y0_i) + sqrt(delta_t) eps.
torch::Tensor inter_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i,
                           const torch::Tensor& y0_j, std::int64_t t,
                           const torch::Tensor& eps);
torch::Tensor inter_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i,
                           const torch::Tensor& y0_j, const torch::Tensor& t,
                           const torch::Tensor& eps);

// Per-sample mean absolute difference, [B,...] -> [B].
torch::Tensor mean_l1(const torch::Tensor& a, const torch::Tensor& b);

// loss_intra = mean |target - eps_pred|; loss_inter = -mean |target - eps_pred|.
torch::Tensor intra_loss(const torch::Tensor& target, const torch::Tensor& eps_pred);
torch::Tensor inter_loss(const torch::Tensor& target, const torch::Tensor& eps_pred);

// Nearest label other than true_class; ties break low. Requires K >= 2.
std::int64_t confusing_class(const torch::Tensor& y0_estimate,
                             const LabelCodebook& codebook,
                             std::int64_t true_class);
std::vector<std::int64_t> confusing_classes(const torch::Tensor& y0_estimates,
                                            const LabelCodebook& codebook,
                                            const std::vector<std::int64_t>& true_classes);

struct LossOptions {
  double alpha = 0.2;
  // When set, each sample's inter term is -min(mean L1, hinge).
  std::optional<double> inter_hinge;
};

struct LossTerms {
  torch::Tensor total;      // differentiable scalar
  double intra = 0.0;       // batch mean of loss_intra
  double inter = 0.0;       // batch mean of loss_inter (<= 0)
  double margin = 0.0;      // batch mean of d_j - d_i on the one-step estimate
  std::vector<std::int64_t> timesteps;
  std::vector<std::int64_t> confusing;
};

// L_cls = L_intra + alpha L_inter over a batch x [B,c,h,w] with classes [B].
LossTerms classification_loss(const BridgeSchedule& s, NoisePredictor& predictor,
                              const torch::Tensor& x,
                              const std::vector<std::int64_t>& classes,
                              const LabelCodebook& codebook,
                              const LossOptions& options, torch::Generator& gen);

}  // namespace idc

#endif  // IDC_BRIDGE_HPP_

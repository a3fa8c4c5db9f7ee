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

#include "idc/bridge.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "idc/binary_io.hpp"
#include "idc/util.hpp"

namespace idc {
namespace {

void CheckStep(const BridgeSchedule& s, std::int64_t t, std::int64_t lo,
               std::int64_t hi, const char* what) {
  if (t < lo || t > hi) {
    throw std::invalid_argument(std::string(what) + ": timestep " +
                                std::to_string(t) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) +
                                "] for T=" + std::to_string(s.num_steps));
  }
}

void CheckSteps(const BridgeSchedule& s, const torch::Tensor& t,
                std::int64_t batch, const char* what) {
  if (t.dim() != 1 || t.size(0) != batch) {
    throw std::invalid_argument(std::string(what) + ": expected one timestep per sample");
  }
  CheckStep(s, t.min().item<std::int64_t>(), 1, s.num_steps, what);
  CheckStep(s, t.max().item<std::int64_t>(), 1, s.num_steps, what);
}

// table[t_b] broadcast against `like` ([B, ...]).
torch::Tensor Gather(const std::vector<double>& table, const torch::Tensor& t,
                     const torch::Tensor& like) {
  auto values = torch::tensor(table, torch::TensorOptions().dtype(torch::kFloat64))
                    .index_select(0, t.to(torch::kInt64));
  std::vector<std::int64_t> shape(like.dim(), 1);
  shape[0] = like.size(0);
  return values.to(like.scalar_type()).reshape(shape);
}

std::vector<double> Sqrt(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::sqrt(std::max(v[i], 0.0));
  return out;
}

torch::Tensor StepVector(const torch::Tensor& x, std::int64_t t) {
  return torch::full({x.size(0)}, t, torch::TensorOptions().dtype(torch::kInt64));
}

void PutTable(BinaryWriter& w, const std::vector<double>& v) {
  w.Put<std::uint64_t>(v.size());
  for (double d : v) w.Put<double>(d);
}

std::vector<double> GetTable(BinaryReader& r, std::int64_t expected) {
  const auto n = r.Get<std::uint64_t>();
  if (n != static_cast<std::uint64_t>(expected)) r.Truncated();
  std::vector<double> v(n);
  for (auto& d : v) d = r.Get<double>();
  return v;
}

}  // namespace

BridgeSchedule build_schedule(std::int64_t num_steps, double s_max) {
  if (num_steps < 2) {
    throw std::invalid_argument("bridge schedule needs num_steps >= 2");
  }
  if (!(s_max > 0.0)) throw std::invalid_argument("s_max must be positive");
  const auto T = static_cast<std::size_t>(num_steps);
  BridgeSchedule s;
  s.num_steps = num_steps;
  s.s_max = s_max;
  s.m.assign(T + 1, 0.0);
  s.delta.assign(T + 1, 0.0);
  for (std::size_t t = 0; t <= T; ++t) {
    s.m[t] = static_cast<double>(t) / static_cast<double>(T);
    s.delta[t] = 2.0 * s_max * s.m[t] * (1.0 - s.m[t]);
  }
  s.m[T] = 1.0;
  s.delta[0] = 0.0;
  s.delta[T] = 0.0;

  s.gamma.assign(T + 1, 0.0);
  s.delta_cond.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    s.gamma[t] = (1.0 - s.m[t]) / (1.0 - s.m[t - 1]);
    s.delta_cond[t] = s.delta[t] - s.gamma[t] * s.gamma[t] * s.delta[t - 1];
  }

  s.c_x.assign(T + 1, 0.0);
  s.c_y.assign(T + 1, 0.0);
  s.c_eps.assign(T + 1, 0.0);
  s.post_var.assign(T + 1, 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    const double ratio = s.delta[t - 1] / s.delta[t];
    const double cond = s.delta_cond[t] / s.delta[t];
    s.c_x[t] = s.m[t - 1] - s.m[t] * s.gamma[t] * ratio;
    s.c_y[t] = ratio * s.gamma[t] + (1.0 - s.m[t - 1]) * cond;
    s.c_eps[t] = -(1.0 - s.m[t - 1]) * cond;
    s.post_var[t] = s.delta_cond[t] * ratio;
  }
  return s;
}

void SaveSchedule(const BridgeSchedule& s, std::ostream& out) {
  BinaryWriter w(out);
  w.Put<std::int64_t>(s.num_steps);
  w.Put<double>(s.s_max);
  for (const auto* table : {&s.m, &s.delta, &s.gamma, &s.delta_cond, &s.c_x,
                            &s.c_y, &s.c_eps, &s.post_var}) {
    PutTable(w, *table);
  }
}

BridgeSchedule LoadSchedule(std::istream& in) {
  BinaryReader r(in, "schedule");
  BridgeSchedule s;
  s.num_steps = r.Get<std::int64_t>();
  if (s.num_steps < 2 || s.num_steps > 100000) r.Truncated();
  s.s_max = r.Get<double>();
  for (auto* table : {&s.m, &s.delta, &s.gamma, &s.delta_cond, &s.c_x, &s.c_y,
                      &s.c_eps, &s.post_var}) {
    *table = GetTable(r, s.num_steps + 1);
  }
  return s;
}

torch::Tensor forward_marginal(const BridgeSchedule& s, const torch::Tensor& y0,
                               const torch::Tensor& x, std::int64_t t,
                               const torch::Tensor& noise) {
  CheckStep(s, t, 1, s.num_steps, "forward_marginal");
  CheckSameShape(y0, x, "forward_marginal");
  CheckSameShape(noise, x, "forward_marginal");
  return (1.0 - s.m[t]) * y0 + s.m[t] * x + std::sqrt(s.delta[t]) * noise;
}

torch::Tensor forward_marginal(const BridgeSchedule& s, const torch::Tensor& y0,
                               const torch::Tensor& x, const torch::Tensor& t,
                               const torch::Tensor& noise) {
  CheckSameShape(y0, x, "forward_marginal");
  CheckSameShape(noise, x, "forward_marginal");
  CheckSteps(s, t, x.size(0), "forward_marginal");
  auto m = Gather(s.m, t, x);
  return (1 - m) * y0 + m * x + Gather(Sqrt(s.delta), t, x) * noise;
}

torch::Tensor forward_transition(const BridgeSchedule& s,
                                 const torch::Tensor& y_prev,
                                 const torch::Tensor& x, std::int64_t t,
                                 const torch::Tensor& noise) {
  CheckStep(s, t, 2, s.num_steps, "forward_transition");
  CheckSameShape(y_prev, x, "forward_transition");
  CheckSameShape(noise, x, "forward_transition");
  const double g = s.gamma[t];
  return g * y_prev + (s.m[t] - g * s.m[t - 1]) * x +
         std::sqrt(std::max(s.delta_cond[t], 0.0)) * noise;
}

torch::Tensor true_posterior_mean(const BridgeSchedule& s,
                                  const torch::Tensor& y_t,
                                  const torch::Tensor& y0,
                                  const torch::Tensor& x, std::int64_t t) {
  CheckStep(s, t, 2, s.num_steps - 1, "true_posterior_mean");
  CheckSameShape(y_t, x, "true_posterior_mean");
  CheckSameShape(y0, x, "true_posterior_mean");
  const double ratio = s.delta[t - 1] / s.delta[t];
  const double coef_y = ratio * s.gamma[t];
  const double coef_y0 = (1.0 - s.m[t - 1]) * s.delta_cond[t] / s.delta[t];
  const double coef_x = s.m[t - 1] - s.m[t] * s.gamma[t] * ratio;
  return coef_y * y_t + coef_y0 * y0 + coef_x * x;
}

torch::Tensor predict_y0_onestep(const BridgeSchedule& s,
                                 const torch::Tensor& y_t,
                                 const torch::Tensor& eps_pred, std::int64_t t) {
  CheckStep(s, t, 1, s.num_steps, "predict_y0_onestep");
  CheckSameShape(y_t, eps_pred, "predict_y0_onestep");
  return y_t - eps_pred;
}

torch::Tensor reverse_step(const BridgeSchedule& s, const torch::Tensor& y_t,
                           const torch::Tensor& x,
                           const torch::Tensor& eps_pred, std::int64_t t,
                           const torch::Tensor& noise) {
  CheckStep(s, t, 1, s.num_steps, "reverse_step");
  CheckSameShape(y_t, x, "reverse_step");
  CheckSameShape(eps_pred, x, "reverse_step");
  if (t > 1) CheckSameShape(noise, x, "reverse_step");

  if (t == s.num_steps) {
    // delta_T = 0 makes the coefficient form 0/0 here. y_T = x is pinned, so
    // q(y_{T-1} | y_0, x) is just the forward marginal at T-1; plug in the
    // one-step estimate of y_0. Its mean is the t -> T limit of the interior
    // rule under this schedule family.
    const double m = s.m[t - 1];
    auto y0_hat = y_t - eps_pred;
    return (1.0 - m) * y0_hat + m * x + std::sqrt(s.delta[t - 1]) * noise;
  }
  auto mean = s.c_x[t] * x + s.c_y[t] * y_t + s.c_eps[t] * eps_pred;
  if (t == 1) return mean;
  return mean + std::sqrt(std::max(s.post_var[t], 0.0)) * noise;
}

std::vector<torch::Tensor> draw_chain_noise(const BridgeSchedule& s,
                                            const torch::Tensor& x,
                                            torch::Generator& gen) {
  std::vector<torch::Tensor> noise;
  noise.reserve(s.num_steps - 1);
  for (std::int64_t t = s.num_steps; t >= 2; --t) {
    noise.push_back(torch::randn(x.sizes(), gen, x.options().requires_grad(false)));
  }
  return noise;
}

torch::Tensor sample_label(const BridgeSchedule& s, NoisePredictor& predictor,
                           const torch::Tensor& x,
                           const std::vector<torch::Tensor>& noise) {
  if (static_cast<std::int64_t>(noise.size()) != s.num_steps - 1) {
    throw std::invalid_argument("sample_label: expected T-1 noise tensors");
  }
  auto y = x;
  for (std::int64_t t = s.num_steps; t >= 1; --t) {
    auto eps = predictor(y, StepVector(x, t));
    const auto& z = t >= 2 ? noise[s.num_steps - t] : torch::Tensor();
    y = reverse_step(s, y, x, eps, t, z);
  }
  return y;
}

torch::Tensor sample_label(const BridgeSchedule& s, NoisePredictor& predictor,
                           const torch::Tensor& x, torch::Generator& gen) {
  return sample_label(s, predictor, x, draw_chain_noise(s, x, gen));
}

torch::Tensor intra_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i, std::int64_t t,
                           const torch::Tensor& eps) {
  CheckStep(s, t, 1, s.num_steps, "intra_target");
  CheckSameShape(x, y0_i, "intra_target");
  CheckSameShape(x, eps, "intra_target");
  return s.m[t] * (x - y0_i) + std::sqrt(s.delta[t]) * eps;
}

torch::Tensor intra_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i, const torch::Tensor& t,
                           const torch::Tensor& eps) {
  CheckSameShape(x, y0_i, "intra_target");
  CheckSameShape(x, eps, "intra_target");
  CheckSteps(s, t, x.size(0), "intra_target");
  return Gather(s.m, t, x) * (x - y0_i) + Gather(Sqrt(s.delta), t, x) * eps;
}

torch::Tensor inter_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i,
                           const torch::Tensor& y0_j, std::int64_t t,
                           const torch::Tensor& eps) {
  CheckStep(s, t, 1, s.num_steps, "inter_target");
  CheckSameShape(x, y0_i, "inter_target");
  CheckSameShape(x, y0_j, "inter_target");
  CheckSameShape(x, eps, "inter_target");
  return s.m[t] * (x - y0_j) + s.m[t - 1] * (y0_j - y0_i) +
         std::sqrt(s.delta[t]) * eps;
}

torch::Tensor inter_target(const BridgeSchedule& s, const torch::Tensor& x,
                           const torch::Tensor& y0_i,
                           const torch::Tensor& y0_j, const torch::Tensor& t,
                           const torch::Tensor& eps) {
  CheckSameShape(x, y0_i, "inter_target");
  CheckSameShape(x, y0_j, "inter_target");
  CheckSameShape(x, eps, "inter_target");
  CheckSteps(s, t, x.size(0), "inter_target");
  return Gather(s.m, t, x) * (x - y0_j) + Gather(s.m, t - 1, x) * (y0_j - y0_i) +
         Gather(Sqrt(s.delta), t, x) * eps;
}

torch::Tensor mean_l1(const torch::Tensor& a, const torch::Tensor& b) {
  CheckSameShape(a, b, "mean_l1");
  return (a - b).abs().flatten(1).mean(1);
}

torch::Tensor intra_loss(const torch::Tensor& target, const torch::Tensor& eps_pred) {
  return mean_l1(target, eps_pred);
}

torch::Tensor inter_loss(const torch::Tensor& target, const torch::Tensor& eps_pred) {
  return -mean_l1(target, eps_pred);
}

std::vector<std::int64_t> confusing_classes(const torch::Tensor& y0_estimates,
                                            const LabelCodebook& codebook,
                                            const std::vector<std::int64_t>& true_classes) {
  if (codebook.num_classes < 2) {
    throw std::invalid_argument("confusing_class needs at least two classes");
  }
  torch::NoGradGuard no_grad;
  auto d = label_distances(y0_estimates.detach().to(torch::kFloat64), codebook);
  if (d.dim() == 1) d = d.unsqueeze(0);
  d = d.contiguous();
  if (static_cast<std::size_t>(d.size(0)) != true_classes.size()) {
    throw std::invalid_argument("confusing_class: one true class per sample required");
  }
  auto acc = d.accessor<double, 2>();
  std::vector<std::int64_t> out;
  out.reserve(true_classes.size());
  for (std::int64_t b = 0; b < d.size(0); ++b) {
    const auto truth = true_classes[b];
    if (truth < 0 || truth >= codebook.num_classes) {
      throw std::invalid_argument("confusing_class: class index out of range");
    }
    std::int64_t best = -1;
    for (std::int64_t k = 0; k < codebook.num_classes; ++k) {
      if (k == truth) continue;
      if (best < 0 || acc[b][k] < acc[b][best]) best = k;
    }
    out.push_back(best);
  }
  return out;
}

std::int64_t confusing_class(const torch::Tensor& y0_estimate,
                             const LabelCodebook& codebook,
                             std::int64_t true_class) {
  return confusing_classes(y0_estimate, codebook, {true_class}).front();
}

LossTerms classification_loss(const BridgeSchedule& s, NoisePredictor& predictor,
                              const torch::Tensor& x,
                              const std::vector<std::int64_t>& classes,
                              const LabelCodebook& codebook,
                              const LossOptions& options, torch::Generator& gen) {
  if (x.dim() != 4 || x.size(0) == 0) {
    throw std::invalid_argument("classification_loss: expected a nonempty [B,c,h,w] batch");
  }
  if (static_cast<std::size_t>(x.size(0)) != classes.size()) {
    throw std::invalid_argument("classification_loss: one class per sample required");
  }
  if (options.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");

  const auto batch = x.size(0);
  auto class_index = torch::tensor(classes, torch::TensorOptions().dtype(torch::kInt64));
  auto labels = codebook.LabelsLike(x);
  auto y0_i = labels.index_select(0, class_index);

  auto t = torch::randint(1, s.num_steps + 1, {batch}, gen,
                          torch::TensorOptions().dtype(torch::kInt64));
  auto eps = torch::randn(x.sizes(), gen, x.options().requires_grad(false));
  auto y_t = forward_marginal(s, y0_i, x, t, eps);
  auto eps_pred = predictor(y_t, t);

  LossTerms terms;
  terms.timesteps.assign(t.data_ptr<std::int64_t>(), t.data_ptr<std::int64_t>() + batch);

  auto target_i = intra_target(s, x, y0_i, t, eps);
  auto l_intra = intra_loss(target_i, eps_pred);
  auto per_sample = l_intra;
  torch::Tensor l_inter;
  {
    torch::NoGradGuard no_grad;
    auto y0_hat = (y_t - eps_pred).detach();
    terms.confusing = confusing_classes(y0_hat, codebook, classes);
    auto d = label_distances(y0_hat.to(torch::kFloat64), codebook);
    auto j_index = torch::tensor(terms.confusing, torch::TensorOptions().dtype(torch::kInt64));
    auto d_i = d.gather(1, class_index.unsqueeze(1));
    auto d_j = d.gather(1, j_index.unsqueeze(1));
    terms.margin = (d_j - d_i).mean().item<double>();
  }
  auto j_index = torch::tensor(terms.confusing, torch::TensorOptions().dtype(torch::kInt64));
  auto y0_j = labels.index_select(0, j_index);
  auto target_j = inter_target(s, x, y0_i, y0_j, t, eps);
  auto dist_j = mean_l1(target_j, eps_pred);
  if (options.inter_hinge) dist_j = dist_j.clamp_max(*options.inter_hinge);
  l_inter = -dist_j;
  if (options.alpha > 0.0) per_sample = per_sample + options.alpha * l_inter;

  terms.total = per_sample.mean();
  terms.intra = l_intra.mean().item<double>();
  terms.inter = l_inter.mean().item<double>();
  return terms;
}

}  // namespace idc

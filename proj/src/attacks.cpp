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

#include "idc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace idc {
namespace {

enum class LossKind { kCrossEntropy, kMargin };

torch::Tensor ClassIndex(const std::vector<std::int64_t>& classes) {
  return torch::tensor(classes, torch::TensorOptions().dtype(torch::kInt64));
}

// Summed over the batch so each sample's gradient is independent.
torch::Tensor AttackLoss(const SoftLogits& logits,
                         const std::vector<std::int64_t>& classes, LossKind kind) {
  auto index = ClassIndex(classes).unsqueeze(1);
  auto true_logp = logits.log_probs.gather(1, index).squeeze(1);
  if (kind == LossKind::kCrossEntropy) return -true_logp.sum();
  auto mask = torch::zeros_like(logits.log_probs, torch::kBool).scatter_(1, index, true);
  auto others = logits.log_probs.masked_fill(mask, -std::numeric_limits<double>::infinity());
  return (std::get<0>(others.max(1)) - true_logp).sum();
}

torch::Tensor LossGradient(const ClassifierBundle& bundle, const torch::Tensor& x,
                           const std::vector<std::int64_t>& classes,
                           GradientMode mode, std::int64_t n_eot, LossKind kind,
                           torch::Generator& gen) {
  if (n_eot < 1) throw std::invalid_argument("n_eot must be >= 1");
  if (static_cast<std::size_t>(x.size(0)) != classes.size()) {
    throw std::invalid_argument("estimate_gradient: one class per sample required");
  }
  auto base = x.detach();
  auto total = torch::zeros_like(base);
  for (std::int64_t draw = 0; draw < n_eot; ++draw) {
    auto noise = draw_chain_noise(bundle.schedule, base, gen);
    auto x_in = base.clone().requires_grad_(true);
    torch::Tensor y0_hat;
    if (mode == GradientMode::kExact) {
      y0_hat = sample_label(bundle.schedule, *bundle.predictor, x_in, noise);
    } else {
      torch::Tensor forward;
      {
        torch::NoGradGuard no_grad;
        forward = sample_label(bundle.schedule, *bundle.predictor, base, noise);
      }
      // Forward value is the sampler output; backward is the identity.
      y0_hat = x_in + (forward - base);
    }
    auto d = label_distances(y0_hat.to(torch::kFloat64), bundle.codebook);
    auto loss = AttackLoss(soft_logits_from_distances(d, bundle.tau), classes, kind);
    total += torch::autograd::grad({loss}, {x_in})[0];
  }
  auto grad = total / static_cast<double>(n_eot);
  if (!torch::isfinite(grad).all().item<bool>()) {
    std::ostringstream os;
    os << "non-finite attack gradient (" << (~torch::isfinite(grad)).sum().item<std::int64_t>()
       << " of " << grad.numel() << " entries, mode=" << ToString(mode)
       << ", n_eot=" << n_eot << ")";
    throw std::runtime_error(os.str());
  }
  return grad;
}

struct StepPlan {
  std::int64_t steps;
  double step_size;
  bool random_start;
  bool momentum;
  LossKind loss;
  GradientMode mode;
};

StepPlan PlanFor(const AttackConfig& c) {
  StepPlan p{c.steps, c.step_size, c.random_start, false, LossKind::kCrossEntropy,
             c.gradient_mode};
  switch (c.family) {
    case AttackFamily::kFgsm:
      // Single signed step of size epsilon from the clean input.
      p.steps = 1;
      p.step_size = c.epsilon;
      p.random_start = false;
      break;
    case AttackFamily::kPgd:
      break;
    case AttackFamily::kMifgsm:
      p.momentum = true;
      break;
    case AttackFamily::kCwMargin:
      p.loss = LossKind::kMargin;
      break;
    case AttackFamily::kPgdEot:
      p.mode = GradientMode::kExact;
      break;
    case AttackFamily::kBpdaEot:
      p.mode = GradientMode::kBpda;
      break;
  }
  return p;
}

}  // namespace

AttackFamily ParseAttackFamily(const std::string& name) {
  if (name == "fgsm") return AttackFamily::kFgsm;
  if (name == "pgd") return AttackFamily::kPgd;
  if (name == "mifgsm") return AttackFamily::kMifgsm;
  if (name == "cw_margin" || name == "cw") return AttackFamily::kCwMargin;
  if (name == "pgd_eot") return AttackFamily::kPgdEot;
  if (name == "bpda_eot") return AttackFamily::kBpdaEot;
  throw std::invalid_argument("unknown attack family '" + name + "'");
}

std::string ToString(AttackFamily family) {
  switch (family) {
    case AttackFamily::kFgsm: return "fgsm";
    case AttackFamily::kPgd: return "pgd";
    case AttackFamily::kMifgsm: return "mifgsm";
    case AttackFamily::kCwMargin: return "cw_margin";
    case AttackFamily::kPgdEot: return "pgd_eot";
    case AttackFamily::kBpdaEot: return "bpda_eot";
  }
  return "?";
}

GradientMode ParseGradientMode(const std::string& name) {
  if (name == "exact") return GradientMode::kExact;
  if (name == "bpda") return GradientMode::kBpda;
  throw std::invalid_argument("unknown gradient mode '" + name + "'");
}

std::string ToString(GradientMode mode) {
  return mode == GradientMode::kExact ? "exact" : "bpda";
}

double ParseFraction(const std::string& text) {
  const auto slash = text.find('/');
  std::size_t used = 0;
  try {
    if (slash == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    }
    const auto num_text = text.substr(0, slash);
    const auto den_text = text.substr(slash + 1);
    std::size_t used_den = 0;
    const double num = std::stod(num_text, &used);
    const double den = std::stod(den_text, &used_den);
    if (used != num_text.size() || used_den != den_text.size() || den == 0.0) {
      throw std::invalid_argument(text);
    }
    return num / den;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot parse '" + text + "' as a number or fraction");
  }
}

AttackConfig AttackConfig::Defaults(AttackFamily family, double epsilon) {
  AttackConfig c;
  c.family = family;
  c.epsilon = epsilon;
  switch (family) {
    case AttackFamily::kFgsm:
      c.steps = 1;
      c.step_size = epsilon;
      c.random_start = false;
      break;
    case AttackFamily::kPgd:
      c.steps = 20;
      c.step_size = 2.0 / 255.0;
      c.random_start = true;
      break;
    case AttackFamily::kMifgsm:
      c.steps = 5;
      c.step_size = epsilon / 5.0;
      c.random_start = false;
      c.momentum_decay = 1.0;
      break;
    case AttackFamily::kCwMargin:
      c.steps = 1000;
      c.step_size = 0.01;
      c.random_start = false;
      break;
    case AttackFamily::kPgdEot:
      c.steps = 200;
      c.step_size = 2.0 / 255.0;
      c.eot_samples = 20;
      c.random_start = true;
      c.gradient_mode = GradientMode::kExact;
      break;
    case AttackFamily::kBpdaEot:
      c.steps = 200;
      c.step_size = 2.0 / 255.0;
      c.eot_samples = 20;
      c.random_start = true;
      c.gradient_mode = GradientMode::kBpda;
      break;
  }
  return c;
}

void AttackConfig::Validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (family != AttackFamily::kFgsm && epsilon > 0.0 && !(step_size > 0.0)) {
    throw std::invalid_argument("step_size must be > 0 for iterative attacks");
  }
  if (eot_samples < 1) throw std::invalid_argument("eot_samples must be >= 1");
  if (momentum_decay < 0.0) throw std::invalid_argument("momentum_decay must be >= 0");
}

torch::Tensor estimate_gradient(const ClassifierBundle& bundle,
                                const torch::Tensor& x,
                                const std::vector<std::int64_t>& true_classes,
                                GradientMode mode, std::int64_t n_eot,
                                torch::Generator& gen) {
  return LossGradient(bundle, x, true_classes, mode, n_eot, LossKind::kCrossEntropy, gen);
}

torch::Tensor project_linf(const torch::Tensor& x_adv, const torch::Tensor& x,
                           double radius, const DataRange& range) {
  torch::NoGradGuard no_grad;
  auto out = torch::max(torch::min(x_adv, x + radius), x - radius);
  out = out.clamp(range.lo, range.hi);
  // x +- radius rounds in low precision. Offending entries are snapped to the
  // float64 ball, then walked one ulp toward x until the bound holds.
  auto ref = x.to(torch::kFloat64);
  auto over = (out.to(torch::kFloat64) - ref).abs() > radius;
  if (!over.any().item<bool>()) return out;
  auto snapped = ref + (out.to(torch::kFloat64) - ref).clamp(-radius, radius);
  out = torch::where(over, snapped.to(out.scalar_type()), out);
  for (int iter = 0; iter < 4; ++iter) {
    over = (out.to(torch::kFloat64) - ref).abs() > radius;
    if (!over.any().item<bool>()) return out;
    out = torch::where(over, torch::nextafter(out, x), out);
  }
  throw std::logic_error("project_linf: bound not reached");
}

torch::Tensor craft_adversarial(const ClassifierBundle& bundle,
                                const torch::Tensor& x,
                                const std::vector<std::int64_t>& true_classes,
                                const AttackConfig& config, torch::Generator& gen) {
  config.Validate();
  const auto& range = bundle.codebook.data_range;
  const double radius = config.epsilon * range.width();
  const auto plan = PlanFor(config);
  const double step = plan.step_size * range.width();
  const auto clean = x.detach();
  if (radius == 0.0) return clean.clone();

  auto adv = clean.clone();
  if (plan.random_start) {
    auto start = torch::rand(clean.sizes(), gen, clean.options()) * (2.0 * radius) - radius;
    adv = project_linf(adv + start, clean, radius, range);
  }
  auto velocity = torch::zeros_like(clean);
  for (std::int64_t i = 0; i < plan.steps; ++i) {
    auto grad = LossGradient(bundle, adv, true_classes, plan.mode, config.eot_samples,
                             plan.loss, gen);
    torch::Tensor direction;
    if (plan.momentum) {
      auto l1 = grad.abs().flatten(1).sum(1).clamp_min(1e-12);
      std::vector<std::int64_t> shape(grad.dim(), 1);
      shape[0] = grad.size(0);
      velocity = config.momentum_decay * velocity + grad / l1.reshape(shape);
      direction = velocity.sign();
    } else {
      direction = grad.sign();
    }
    adv = project_linf(adv + step * direction, clean, radius, range);
  }
  return adv.detach();
}

EvalReport evaluate_robustness(const ClassifierBundle& bundle,
                               const LabeledImages& data,
                               const AttackConfig& config, torch::Generator& gen,
                               std::int64_t batch_size) {
  bundle.Validate();
  config.Validate();
  const auto n = data.images.size(0);
  if (n == 0) throw std::invalid_argument("evaluate_robustness: empty dataset");
  if (static_cast<std::size_t>(n) != data.labels.size()) {
    throw std::invalid_argument("evaluate_robustness: image/label count mismatch");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  EvalReport report;
  report.attack = config;
  report.n_samples = n;
  const auto evals_before = bundle.predictor->evaluated_samples();
  const auto calls_before = bundle.predictor->calls();
  const auto& range = bundle.codebook.data_range;
  std::int64_t clean_correct = 0, robust_correct = 0;

  for (std::int64_t start = 0; start < n; start += batch_size) {
    const auto end = std::min(n, start + batch_size);
    auto xb = data.images.slice(0, start, end);
    std::vector<std::int64_t> yb(data.labels.begin() + start, data.labels.begin() + end);
    auto clean = classify(bundle, xb, gen);

    std::vector<std::int64_t> keep, keep_labels;
    for (std::size_t i = 0; i < yb.size(); ++i) {
      SampleRecord r;
      r.index = start + static_cast<std::int64_t>(i);
      r.true_class = yb[i];
      r.clean_prediction = clean[i];
      r.adversarial_prediction = clean[i];
      report.records.push_back(r);
      if (clean[i] == yb[i]) {
        ++clean_correct;
        keep.push_back(static_cast<std::int64_t>(i));
        keep_labels.push_back(yb[i]);
      }
    }
    if (keep.empty()) continue;

    auto subset = xb.index_select(0, ClassIndex(keep));
    auto adv = craft_adversarial(bundle, subset, keep_labels, config, gen);
    auto adv_pred = classify(bundle, adv, gen);
    auto diff = (adv.to(torch::kFloat64) - subset.to(torch::kFloat64)).abs().flatten(1);
    auto linf = (std::get<0>(diff.max(1)) / range.width()).contiguous();
    auto flat = adv.to(torch::kFloat64).flatten(1);
    auto in_range = ((std::get<0>(flat.min(1)) >= range.lo) &
                     (std::get<0>(flat.max(1)) <= range.hi)).contiguous();
    for (std::size_t k = 0; k < keep.size(); ++k) {
      auto& r = report.records[start + keep[k]];
      r.attacked = true;
      r.adversarial_prediction = adv_pred[k];
      r.linf = linf[k].item<double>();
      r.in_range = in_range[k].item<bool>();
      report.max_linf = std::max(report.max_linf, r.linf);
      report.all_in_range = report.all_in_range && r.in_range;
      if (adv_pred[k] == r.true_class) ++robust_correct;
    }
  }
  report.clean_accuracy = static_cast<double>(clean_correct) / static_cast<double>(n);
  report.robust_accuracy = static_cast<double>(robust_correct) / static_cast<double>(n);
  report.predictor_eval_count = bundle.predictor->evaluated_samples() - evals_before;
  report.predictor_calls = bundle.predictor->calls() - calls_before;
  return report;
}

}  // namespace idc

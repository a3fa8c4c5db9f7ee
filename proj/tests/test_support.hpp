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

#ifndef IDC_TESTS_TEST_SUPPORT_HPP_
#define IDC_TESTS_TEST_SUPPORT_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <torch/torch.h>

#include "idc/bridge.hpp"
#include "idc/classifier.hpp"
#include "idc/codebook.hpp"
#include "idc/predictor.hpp"
#include "idc/util.hpp"

namespace idc::testing {

// Cheating predictor eps*(y_t, t) = y_t - y0. With a resolver, y0 is looked
// up from the chain start y_T = x on the first call of each chain.
class OraclePredictor : public NoisePredictor {
 public:
  explicit OraclePredictor(torch::Tensor y0) : y0_(std::move(y0)) {}
  OraclePredictor(std::int64_t num_steps,
                  std::function<torch::Tensor(const torch::Tensor&)> resolver)
      : num_steps_(num_steps), resolver_(std::move(resolver)) {}

 protected:
  torch::Tensor Forward(const torch::Tensor& y_t, const torch::Tensor& t) override {
    if (resolver_ && t[0].item<std::int64_t>() == num_steps_) y0_ = resolver_(y_t);
    return y_t - y0_.to(y_t.scalar_type());
  }

 private:
  torch::Tensor y0_;
  std::int64_t num_steps_ = 0;
  std::function<torch::Tensor(const torch::Tensor&)> resolver_;
};

// Outputs a constant everywhere; stays connected to y_t for autograd.
class ConstantPredictor : public NoisePredictor {
 public:
  explicit ConstantPredictor(double value) : value_(value) {}

 protected:
  torch::Tensor Forward(const torch::Tensor& y_t, const torch::Tensor&) override {
    return torch::full_like(y_t, value_) + 0.0 * y_t;
  }

 private:
  double value_;
};

// Deterministic case generator for property tests.
class Cases {
 public:
  explicit Cases(std::uint64_t seed) : engine_(seed) {}
  std::int64_t Int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  double Real(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t Seed() { return engine_(); }
  torch::Tensor Normal(std::vector<std::int64_t> shape,
                       torch::ScalarType dtype = torch::kFloat64) {
    auto gen = MakeGenerator(Seed());
    return torch::randn(shape, gen, torch::TensorOptions().dtype(dtype));
  }
  torch::Tensor Uniform(std::vector<std::int64_t> shape, double lo, double hi,
                        torch::ScalarType dtype = torch::kFloat64) {
    auto gen = MakeGenerator(Seed());
    return torch::rand(shape, gen, torch::TensorOptions().dtype(dtype)) * (hi - lo) + lo;
  }

 private:
  std::mt19937_64 engine_;
};

// Elementwise L1 distance by explicit loops.
inline std::vector<double> BruteDistances(const torch::Tensor& sample,
                                          const LabelCodebook& book) {
  auto s = sample.to(torch::kFloat64).contiguous().flatten();
  auto l = book.labels.to(torch::kFloat64).contiguous().flatten(1);
  const double* sp = s.data_ptr<double>();
  std::vector<double> out;
  for (std::int64_t k = 0; k < l.size(0); ++k) {
    auto row = l[k].contiguous();
    const double* lp = row.data_ptr<double>();
    double d = 0.0;
    for (std::int64_t i = 0; i < s.numel(); ++i) d += std::abs(sp[i] - lp[i]);
    out.push_back(d);
  }
  return out;
}

inline std::int64_t BruteArgmin(const std::vector<double>& d, std::int64_t skip = -1) {
  std::int64_t best = -1;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.size()); ++i) {
    if (i == skip) continue;
    if (best < 0 || d[i] < d[best]) best = i;
  }
  return best;
}

inline double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

// Tiny float64 bundle on 1x4x4 images with randomized weights, used for
// finite-difference checks.
struct ToyBundle {
  ClassifierBundle bundle;
  std::shared_ptr<UNetPredictor> net;
};

inline PredictorConfig ToyPredictorConfig() {
  PredictorConfig c;
  c.model_channels = 8;
  c.channel_multipliers = {1, 2};
  c.res_blocks = 1;
  c.in_channels = c.out_channels = 1;
  c.base_resolution = 4;
  c.num_timesteps = 4;
  c.head_channels = 8;
  return c;
}

inline ToyBundle MakeToyBundle(std::int64_t num_classes = 3, std::uint64_t seed = 5,
                               double weight_noise = 0.3) {
  ToyBundle toy;
  toy.net = build_predictor(ToyPredictorConfig(), seed);
  toy.net->net()->to(torch::kFloat64);
  {
    torch::NoGradGuard no_grad;
    auto gen = MakeGenerator(seed + 1);
    for (auto& p : toy.net->parameters()) {
      p.add_(weight_noise * torch::randn(p.sizes(), gen, p.options()));
    }
  }
  toy.bundle.schedule = build_schedule(4, 1.0);
  toy.bundle.predictor = toy.net;
  toy.bundle.codebook = generate_codebook(num_classes, {1, 4, 4}, {}, seed);
  toy.bundle.tau = 0.1;
  return toy;
}

inline std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("idc_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace idc::testing

#endif  // IDC_TESTS_TEST_SUPPORT_HPP_

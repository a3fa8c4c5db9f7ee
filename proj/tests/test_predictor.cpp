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

#include <gtest/gtest.h>

#include "idc/bridge.hpp"
#include "idc/predictor.hpp"
#include "test_support.hpp"

namespace idc {
namespace {

using testing::Cases;

PredictorConfig Config(std::int64_t cm, std::vector<std::int64_t> u, std::int64_t nr,
                       std::int64_t res = 32, std::int64_t ch = 3) {
  PredictorConfig c;
  c.model_channels = cm;
  c.channel_multipliers = std::move(u);
  c.res_blocks = nr;
  c.base_resolution = res;
  c.in_channels = c.out_channels = ch;
  return c;
}

std::int64_t Enumerate(const UNetPredictor& p) {
  std::int64_t n = 0;
  for (const auto& t : p.parameters()) {
    if (t.requires_grad()) n += t.numel();
  }
  return n;
}

torch::Tensor Steps(std::int64_t b, std::int64_t t) {
  return torch::full({b}, t, torch::kInt64);
}

TEST(Predictor, ShapeContract) {
  auto p = build_predictor(Config(16, {1, 2}, 1, 16), 0);
  Cases cases(1);
  auto x = cases.Uniform({2, 3, 16, 16}, -1, 1, torch::kFloat32);
  auto out = predict_eps(*p, x, Steps(2, 3));
  EXPECT_EQ(out.sizes(), x.sizes());
  for (auto cfg : {Config(8, {1, 2, 2}, 2, 8, 1), Config(16, {1, 4}, 1, 4, 3), Config(4, {1}, 1, 5, 2)}) {
    auto q = build_predictor(cfg, 1);
    auto y = cases.Uniform({1, cfg.in_channels, cfg.base_resolution, cfg.base_resolution}, -1, 1,
                           torch::kFloat32);
    EXPECT_EQ(predict_eps(*q, y, Steps(1, 1)).sizes(), y.sizes());
  }
}

TEST(Predictor, ZeroOutputAtInit) {
  auto p = build_predictor(Config(16, {1, 2}, 1, 16), 3);
  Cases cases(2);
  auto x = cases.Uniform({3, 3, 16, 16}, -1, 1, torch::kFloat32);
  auto out = predict_eps(*p, x, Steps(3, 2));
  EXPECT_EQ(out.abs().max().item<double>(), 0.0);
  auto s = build_schedule(4);
  EXPECT_TRUE(torch::equal(predict_y0_onestep(s, x, out, 2), x));
}

TEST(Predictor, TimestepMattersAfterOneStep) {
  auto cfg = Config(16, {1, 2}, 1, 16);
  auto p = build_predictor(cfg, 4);
  auto s = build_schedule(4);
  auto book = generate_codebook(4, {3, 16, 16}, {}, 0);
  Cases cases(3);
  auto x = cases.Uniform({8, 3, 16, 16}, -1, 1, torch::kFloat32);
  torch::optim::Adam opt(p->parameters(), torch::optim::AdamOptions(1e-3));
  auto gen = MakeGenerator(5);
  auto terms = classification_loss(s, *p, x, {0, 1, 2, 3, 0, 1, 2, 3}, book, {0.2, {}}, gen);
  opt.zero_grad();
  terms.total.backward();
  opt.step();
  torch::NoGradGuard ng;
  auto probe = cases.Uniform({1, 3, 16, 16}, -1, 1, torch::kFloat32);
  auto a = predict_eps(*p, probe, Steps(1, 1));
  auto b = predict_eps(*p, probe, Steps(1, 4));
  EXPECT_GT((a - b).abs().max().item<double>(), 0.0);
}

TEST(Predictor, DeterministicInitAndForward) {
  auto cfg = Config(16, {1, 2}, 1, 8);
  auto a = build_predictor(cfg, 9), b = build_predictor(cfg, 9), c = build_predictor(cfg, 10);
  auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_equal = all_equal && torch::equal(pa[i], pb[i]);
    any_diff = any_diff || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(Predictor, BatchEqualsSingleCalls) {
  auto toy = testing::MakeToyBundle();
  Cases cases(4);
  auto x = cases.Uniform({5, 1, 4, 4}, -1, 1);
  auto t = torch::tensor({1, 2, 3, 4, 2}, torch::kInt64);
  torch::NoGradGuard ng;
  auto batched = predict_eps(*toy.net, x, t);
  for (int i = 0; i < 5; ++i) {
    auto single = predict_eps(*toy.net, x.slice(0, i, i + 1), t.slice(0, i, i + 1));
    EXPECT_LE((batched[i] - single[0]).abs().max().item<double>(), 1e-12);
  }
  auto again = predict_eps(*toy.net, x, t);
  EXPECT_TRUE(torch::equal(batched, again));
}

TEST(Predictor, InputGradientMatchesFiniteDifferences) {
  auto toy = testing::MakeToyBundle(3, 8);
  Cases cases(5);
  auto x = cases.Uniform({2, 1, 4, 4}, -1, 1);
  auto w = cases.Normal({2, 1, 4, 4});
  auto t = torch::tensor({2, 4}, torch::kInt64);
  auto f = [&](const torch::Tensor& in) { return (predict_eps(*toy.net, in, t) * w).sum(); };
  auto xg = x.clone().requires_grad_(true);
  f(xg).backward();
  auto grad = xg.grad();
  for (int dir = 0; dir < 5; ++dir) {
    auto v = cases.Normal({2, 1, 4, 4});
    const double h = 1e-6;
    torch::NoGradGuard ng;
    const double numeric = (f(x + h * v).item<double>() - f(x - h * v).item<double>()) / (2 * h);
    const double analytic = (grad * v).sum().item<double>();
    EXPECT_LE(testing::RelErr(analytic, numeric), 1e-3);
  }
}

TEST(Predictor, CountsCalls) {
  auto p = build_predictor(Config(8, {1}, 1, 4, 1), 0);
  auto x = torch::zeros({3, 1, 4, 4});
  (*p)(x, Steps(3, 1));
  (*p)(x, Steps(3, 2));
  EXPECT_EQ(p->calls(), 2);
  EXPECT_EQ(p->evaluated_samples(), 6);
  p->reset_counters();
  EXPECT_EQ(p->calls(), 0);
}

TEST(Predictor, ContractErrors) {
  EXPECT_THROW(build_predictor(Config(16, {1, 2, 4}, 1, 6), 0), std::invalid_argument);
  EXPECT_THROW(build_predictor(Config(16, {}, 1, 8), 0), std::invalid_argument);
  EXPECT_THROW(build_predictor(Config(16, {2, 1}, 1, 8), 0), std::invalid_argument);
  EXPECT_THROW(build_predictor(Config(0, {1}, 1, 8), 0), std::invalid_argument);
  auto p = build_predictor(Config(8, {1, 2}, 1, 8, 1), 0);
  EXPECT_THROW(predict_eps(*p, torch::zeros({1, 1, 4, 4}), Steps(1, 1)), std::invalid_argument);
  EXPECT_THROW(predict_eps(*p, torch::zeros({1, 1, 8, 8}), Steps(1, 0)), std::invalid_argument);
  EXPECT_THROW(predict_eps(*p, torch::zeros({1, 1, 8, 8}), Steps(1, 5)), std::invalid_argument);
  EXPECT_THROW(predict_eps(*p, torch::zeros({2, 1, 8, 8}), Steps(1, 1)), std::invalid_argument);
}

TEST(ParamCount, MatchesBuiltNetwork) {
  for (auto cfg : {Config(16, {1, 2}, 1, 16), Config(8, {1, 2, 2}, 2, 8, 1), Config(32, {1, 4}, 1),
                   Config(64, {1, 4}, 1), Config(24, {1, 1, 3}, 3, 16), Config(128, {1, 4}, 1)}) {
    auto p = build_predictor(cfg, 0);
    EXPECT_EQ(param_count(cfg), Enumerate(*p)) << cfg.Canonical();
  }
}

TEST(ParamCount, ReferenceConfiguration) {
  const double count = static_cast<double>(param_count(Config(64, {1, 4}, 1)));
  EXPECT_NEAR(count, 9.39e6, 0.1 * 9.39e6);
}

TEST(ParamCount, AblationOrdering) {
  const std::int64_t counts[] = {
      param_count(Config(32, {1, 4}, 1)),    param_count(Config(64, {1, 4}, 1)),
      param_count(Config(64, {1, 2, 4}, 1)), param_count(Config(64, {1, 4}, 2)),
      param_count(Config(128, {1, 4}, 1)),   param_count(Config(64, {1, 4, 8}, 1))};
  for (int i = 1; i < 6; ++i) EXPECT_LT(counts[i - 1], counts[i]) << i;
}

TEST(ParamCount, MonotoneInModelChannels) {
  std::int64_t prev = 0;
  for (std::int64_t cm = 8; cm <= 256; cm += 8) {
    const auto c = param_count(Config(cm, {1, 2, 4}, 1));
    EXPECT_GT(c, prev);
    prev = c;
  }
}

TEST(PredictorConfig, HashTracksEveryField) {
  auto base = Config(64, {1, 4}, 1);
  auto changed = base;
  changed.res_blocks = 2;
  EXPECT_NE(base.Hash(), changed.Hash());
  changed = base;
  changed.channel_multipliers = {1, 4, 4};
  EXPECT_NE(base.Hash(), changed.Hash());
  EXPECT_EQ(base.Hash(), Config(64, {1, 4}, 1).Hash());
}

}  // namespace
}  // namespace idc

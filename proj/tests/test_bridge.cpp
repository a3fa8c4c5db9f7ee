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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "idc/bridge.hpp"
#include "test_support.hpp"

namespace idc {
namespace {

using testing::BruteArgmin;
using testing::BruteDistances;
using testing::Cases;
using testing::OraclePredictor;

constexpr double kExact = 1e-12;

torch::Tensor Scalar(double v) { return torch::full({1, 1, 1, 1}, v, torch::kFloat64); }
double Value(const torch::Tensor& t) { return t.item<double>(); }

double MaxAbs(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

TEST(Schedule, FourStepTable) {
  auto s = build_schedule(4, 1.0);
  const std::vector<double> m{0, 0.25, 0.5, 0.75, 1};
  const std::vector<double> delta{0, 0.375, 0.5, 0.375, 0};
  const std::vector<double> gamma{0.75, 2.0 / 3.0, 0.5, 0};
  const std::vector<double> cond{0.375, 1.0 / 3.0, 0.25, 0};
  for (int t = 0; t <= 4; ++t) {
    EXPECT_NEAR(s.m[t], m[t], kExact);
    EXPECT_NEAR(s.delta[t], delta[t], kExact);
  }
  for (int t = 1; t <= 4; ++t) {
    EXPECT_NEAR(s.gamma[t], gamma[t - 1], kExact);
    EXPECT_NEAR(s.delta_cond[t], cond[t - 1], kExact);
  }
  const double c_eps[] = {-1.0, -0.5, -1.0 / 3.0};
  const double post[] = {0.0, 0.25, 1.0 / 3.0};
  for (int t = 1; t <= 3; ++t) {
    EXPECT_NEAR(s.c_x[t], 0.0, kExact);
    EXPECT_NEAR(s.c_y[t], 1.0, kExact);
    EXPECT_NEAR(s.c_eps[t], c_eps[t - 1], kExact);
    EXPECT_NEAR(s.post_var[t], post[t - 1], kExact);
  }
}

TEST(Schedule, CompositionIdentities) {
  for (std::int64_t steps : {2, 3, 4, 8, 12, 50}) {
    for (double s_max : {0.25, 1.0, 2.0}) {
      auto s = build_schedule(steps, s_max);
      EXPECT_EQ(s.m.front(), 0.0);
      EXPECT_EQ(s.m.back(), 1.0);
      EXPECT_EQ(s.delta.front(), 0.0);
      EXPECT_EQ(s.delta.back(), 0.0);
      for (std::int64_t t = 1; t <= steps; ++t) {
        EXPECT_GT(s.m[t], s.m[t - 1]);
        EXPECT_NEAR(1 - s.m[t], s.gamma[t] * (1 - s.m[t - 1]), kExact);
        EXPECT_NEAR(s.gamma[t] * s.gamma[t] * s.delta[t - 1] + s.delta_cond[t], s.delta[t], kExact);
        EXPECT_GE(s.delta_cond[t], 0.0);
      }
      for (std::int64_t t = 1; t < steps; ++t) {
        EXPECT_NEAR(s.c_x[t], 0.0, kExact);
        EXPECT_NEAR(s.c_y[t], 1.0, kExact);
        EXPECT_GE(s.post_var[t], 0.0);
      }
      EXPECT_NEAR(s.c_eps[1], -1.0, kExact);
      EXPECT_NEAR(s.post_var[1], 0.0, kExact);
    }
  }
}

TEST(Schedule, Errors) {
  EXPECT_THROW(build_schedule(1, 1.0), std::invalid_argument);
  EXPECT_THROW(build_schedule(4, 0.0), std::invalid_argument);
}

TEST(Schedule, SerializationRoundTrip) {
  auto s = build_schedule(8, 0.5);
  std::stringstream ss;
  SaveSchedule(s, ss);
  EXPECT_EQ(LoadSchedule(ss), s);
}

TEST(ForwardMarginal, PinnedAtFinalStep) {
  auto s = build_schedule(4);
  Cases cases(1);
  auto y0 = cases.Normal({2, 3, 4, 4}), x = cases.Normal({2, 3, 4, 4}), z = cases.Normal({2, 3, 4, 4});
  EXPECT_TRUE(torch::equal(forward_marginal(s, y0, x, 4, z), x));
}

TEST(ForwardMarginal, ScalarExample) {
  auto s = build_schedule(4);
  EXPECT_NEAR(Value(forward_marginal(s, Scalar(1), Scalar(3), 2, Scalar(0))), 2.0, kExact);
}

TEST(ForwardMarginal, PerSampleTimesteps) {
  auto s = build_schedule(4);
  Cases cases(2);
  auto y0 = cases.Normal({4, 1, 3, 3}), x = cases.Normal({4, 1, 3, 3}), z = cases.Normal({4, 1, 3, 3});
  auto t = torch::tensor({1, 2, 3, 4}, torch::kInt64);
  auto batched = forward_marginal(s, y0, x, t, z);
  for (int b = 0; b < 4; ++b) {
    auto single = forward_marginal(s, y0[b], x[b], b + 1, z[b]);
    EXPECT_LE(MaxAbs(batched[b], single), kExact);
  }
}

TEST(ForwardMarginal, MonteCarloMoments) {
  auto s = build_schedule(4);
  const std::int64_t n = 100000;
  auto gen = MakeGenerator(3);
  for (std::int64_t t = 1; t <= 3; ++t) {
    auto z = torch::randn({n, 1, 1, 1}, gen, torch::kFloat64);
    auto y = forward_marginal(s, torch::full({n, 1, 1, 1}, 1.0, torch::kFloat64),
                              torch::full({n, 1, 1, 1}, 3.0, torch::kFloat64), t, z);
    const double mean = (1 - s.m[t]) * 1.0 + s.m[t] * 3.0;
    const double var = s.delta[t];
    EXPECT_NEAR(y.mean().item<double>(), mean, 3 * std::sqrt(var / n));
    EXPECT_NEAR(y.var().item<double>(), var, 3 * var * std::sqrt(2.0 / (n - 1)));
  }
}

TEST(ForwardTransition, ScalarExample) {
  auto s = build_schedule(4);
  EXPECT_NEAR(Value(forward_transition(s, Scalar(2), Scalar(3), 2, Scalar(0))), 7.0 / 3.0, kExact);
}

TEST(ForwardTransition, FinalStepReturnsInput) {
  auto s = build_schedule(4);
  Cases cases(4);
  auto prev = cases.Normal({2, 1, 4, 4}), x = cases.Normal({2, 1, 4, 4}), z = cases.Normal({2, 1, 4, 4});
  EXPECT_LE(MaxAbs(forward_transition(s, prev, x, 4, z), x), kExact);
}

TEST(ForwardTransition, ComposesWithMarginal) {
  Cases cases(5);
  for (std::int64_t steps : {2, 4, 8, 12}) {
    auto s = build_schedule(steps);
    auto y0 = cases.Normal({3, 1, 4, 4}), x = cases.Normal({3, 1, 4, 4});
    auto zero = torch::zeros_like(x);
    for (std::int64_t t = 2; t <= steps; ++t) {
      auto mean_prev = forward_marginal(s, y0, x, t - 1, zero);
      auto composed = forward_transition(s, mean_prev, x, t, zero);
      EXPECT_LE(MaxAbs(composed, forward_marginal(s, y0, x, t, zero)), kExact);
    }
  }
}

TEST(ForwardTransition, RejectsFirstStep) {
  auto s = build_schedule(4);
  EXPECT_THROW(forward_transition(s, Scalar(0), Scalar(0), 1, Scalar(0)), std::invalid_argument);
}

TEST(PosteriorMean, ScalarExample) {
  auto s = build_schedule(4);
  for (double eps : {0.0, 1.0, -0.7}) {
    auto y2 = Scalar(2.0 + std::sqrt(0.5) * eps);
    const double expected = 0.75 * 1 + 0.25 * 3 + 0.5 * std::sqrt(0.5) * eps;
    EXPECT_NEAR(Value(true_posterior_mean(s, y2, Scalar(1), Scalar(3), 2)), expected, kExact);
  }
}

TEST(PosteriorMean, MatchesCoefficientForm) {
  Cases cases(6);
  for (std::int64_t steps : {3, 4, 8, 12}) {
    auto s = build_schedule(steps);
    for (std::int64_t t = 2; t < steps; ++t) {
      auto y0 = cases.Normal({2, 3, 4, 4}), x = cases.Normal({2, 3, 4, 4}), eps = cases.Normal({2, 3, 4, 4});
      auto y_t = forward_marginal(s, y0, x, t, eps);
      auto target = s.m[t] * (x - y0) + std::sqrt(s.delta[t]) * eps;
      auto coef = s.c_x[t] * x + s.c_y[t] * y_t + s.c_eps[t] * target;
      EXPECT_LE(MaxAbs(true_posterior_mean(s, y_t, y0, x, t), coef), kExact);
    }
  }
}

TEST(PosteriorMean, DegenerateBridgeStaysAtInput) {
  auto s = build_schedule(4);
  Cases cases(7);
  auto x = cases.Normal({1, 1, 4, 4});
  auto y = x;
  for (std::int64_t t = 3; t >= 2; --t) y = true_posterior_mean(s, y, x, x, t);
  EXPECT_LE(MaxAbs(y, x), kExact);
}

TEST(PosteriorMean, RangeErrors) {
  auto s = build_schedule(4);
  EXPECT_THROW(true_posterior_mean(s, Scalar(0), Scalar(0), Scalar(0), 1), std::invalid_argument);
  EXPECT_THROW(true_posterior_mean(s, Scalar(0), Scalar(0), Scalar(0), 4), std::invalid_argument);
}

TEST(OneStep, OracleRecoversTarget) {
  Cases cases(8);
  auto s = build_schedule(4);
  for (std::int64_t t = 1; t <= 4; ++t) {
    auto y0 = cases.Normal({2, 3, 4, 4}), x = cases.Normal({2, 3, 4, 4}), eps = cases.Normal({2, 3, 4, 4});
    auto y_t = forward_marginal(s, y0, x, t, eps);
    EXPECT_LE(MaxAbs(predict_y0_onestep(s, y_t, y_t - y0, t), y0), kExact);
    EXPECT_TRUE(torch::equal(predict_y0_onestep(s, y_t, torch::zeros_like(y_t), t), y_t));
  }
  EXPECT_THROW(predict_y0_onestep(s, Scalar(0), torch::zeros({1, 1, 1, 2}), 1), std::invalid_argument);
}

TEST(ReverseStep, FirstStepIsNoiseless) {
  auto s = build_schedule(4);
  Cases cases(9);
  auto y1 = cases.Normal({2, 1, 4, 4}), x = cases.Normal({2, 1, 4, 4}), eps = cases.Normal({2, 1, 4, 4});
  auto a = reverse_step(s, y1, x, eps, 1, cases.Normal({2, 1, 4, 4}));
  auto b = reverse_step(s, y1, x, eps, 1, torch::Tensor());
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_LE(MaxAbs(a, y1 - eps), kExact);
}

TEST(ReverseStep, FinalStepScalar) {
  auto s = build_schedule(4);
  EXPECT_NEAR(Value(reverse_step(s, Scalar(3), Scalar(3), Scalar(2), 4, Scalar(0))), 2.5, kExact);
  EXPECT_NEAR(Value(reverse_step(s, Scalar(3), Scalar(3), Scalar(2), 4, Scalar(1))),
              2.5 + std::sqrt(0.375), kExact);
}

TEST(ReverseStep, InteriorCoefficientForm) {
  auto s = build_schedule(4);
  Cases cases(10);
  for (std::int64_t t = 2; t <= 3; ++t) {
    auto y = cases.Normal({1, 1, 4, 4}), x = cases.Normal({1, 1, 4, 4});
    auto e = cases.Normal({1, 1, 4, 4}), z = cases.Normal({1, 1, 4, 4});
    auto expected = s.c_x[t] * x + s.c_y[t] * y + s.c_eps[t] * e + std::sqrt(s.post_var[t]) * z;
    EXPECT_LE(MaxAbs(reverse_step(s, y, x, e, t, z), expected), kExact);
  }
}

TEST(ReverseStep, OracleMeanEqualsPosteriorMean) {
  Cases cases(11);
  auto s = build_schedule(8);
  for (std::int64_t t = 2; t < 8; ++t) {
    auto y0 = cases.Normal({1, 1, 4, 4}), x = cases.Normal({1, 1, 4, 4}), eps = cases.Normal({1, 1, 4, 4});
    auto y_t = forward_marginal(s, y0, x, t, eps);
    auto step = reverse_step(s, y_t, x, y_t - y0, t, torch::zeros_like(x));
    EXPECT_LE(MaxAbs(step, true_posterior_mean(s, y_t, y0, x, t)), kExact);
  }
}

// With the oracle predictor, every chain state y_{t-1} must be distributed as
// the forward marginal q(y_{t-1} | y0, x).
TEST(ReverseStep, OracleChainMatchesMarginalsMonteCarlo) {
  auto s = build_schedule(4);
  const std::int64_t n = 100000;
  auto gen = MakeGenerator(12);
  const double y0v = -0.5, xv = 0.8;
  auto y0 = torch::full({n, 1, 1, 1}, y0v, torch::kFloat64);
  auto x = torch::full({n, 1, 1, 1}, xv, torch::kFloat64);
  auto y = x;
  for (std::int64_t t = 4; t >= 1; --t) {
    auto z = torch::randn({n, 1, 1, 1}, gen, torch::kFloat64);
    y = reverse_step(s, y, x, y - y0, t, z);
    const double mean = (1 - s.m[t - 1]) * y0v + s.m[t - 1] * xv;
    const double var = s.delta[t - 1];
    SCOPED_TRACE("state t-1 = " + std::to_string(t - 1));
    EXPECT_NEAR(y.mean().item<double>(), mean, 3 * std::sqrt(var / n) + kExact);
    EXPECT_NEAR(y.var().item<double>(), var, 3 * var * std::sqrt(2.0 / (n - 1)) + kExact);
  }
  EXPECT_LE((y - y0).abs().max().item<double>(), kExact);
}

TEST(SampleLabel, OracleRecoversLabelAndCountsCalls) {
  for (std::int64_t k : {2, 10, 100}) {
    auto book = generate_codebook(k, {3, 8, 8}, {}, 1);
    auto s = build_schedule(4);
    Cases cases(13);
    auto x = cases.Uniform({k, 3, 8, 8}, -1, 1);
    auto y0 = book.labels.to(torch::kFloat64);
    OraclePredictor oracle(y0);
    auto gen = MakeGenerator(1);
    auto y0_hat = sample_label(s, oracle, x, gen);
    EXPECT_EQ(oracle.calls(), 4);
    EXPECT_LE(MaxAbs(y0_hat, y0), kExact);
  }
}

TEST(SampleLabel, DeterministicGivenSeed) {
  auto s = build_schedule(4);
  testing::ConstantPredictor pred(0.1);
  Cases cases(14);
  auto x = cases.Uniform({2, 1, 4, 4}, -1, 1);
  auto g1 = MakeGenerator(5), g2 = MakeGenerator(5), g3 = MakeGenerator(6);
  auto a = sample_label(s, pred, x, g1);
  EXPECT_TRUE(torch::equal(a, sample_label(s, pred, x, g2)));
  EXPECT_FALSE(torch::equal(a, sample_label(s, pred, x, g3)));
}

TEST(Targets, IntraEqualsDisplacement) {
  Cases cases(15);
  for (std::int64_t steps : {2, 4, 8, 12}) {
    auto s = build_schedule(steps);
    for (std::int64_t t = 1; t <= steps; ++t) {
      auto y0 = cases.Normal({2, 3, 4, 4}), x = cases.Normal({2, 3, 4, 4}), eps = cases.Normal({2, 3, 4, 4});
      auto y_t = forward_marginal(s, y0, x, t, eps);
      EXPECT_LE(MaxAbs(intra_target(s, x, y0, t, eps), y_t - y0), kExact);
    }
    auto y0 = cases.Normal({2, 1, 2, 2}), x = cases.Normal({2, 1, 2, 2}), eps = cases.Normal({2, 1, 2, 2});
    EXPECT_LE(MaxAbs(intra_target(s, x, y0, steps, eps), x - y0), kExact);
  }
}

TEST(Targets, InterSpecialCases) {
  auto s = build_schedule(4);
  EXPECT_NEAR(Value(inter_target(s, Scalar(3), Scalar(1), Scalar(-1), 2, Scalar(0))), 1.5, kExact);
  Cases cases(16);
  auto x = cases.Normal({2, 1, 4, 4}), yi = cases.Normal({2, 1, 4, 4});
  auto yj = cases.Normal({2, 1, 4, 4}), eps = cases.Normal({2, 1, 4, 4});
  for (std::int64_t t = 1; t <= 4; ++t) {
    EXPECT_LE(MaxAbs(inter_target(s, x, yi, yi, t, eps), intra_target(s, x, yi, t, eps)), kExact);
  }
  auto other = cases.Normal({2, 1, 4, 4});
  EXPECT_LE(MaxAbs(inter_target(s, x, yi, yj, 1, eps), inter_target(s, x, other, yj, 1, eps)), kExact);
  EXPECT_LE(MaxAbs(inter_target(s, x, yi, yj, 1, eps), s.m[1] * (x - yj) + std::sqrt(s.delta[1]) * eps), kExact);
}

TEST(Targets, PerSampleTimestepsMatchScalar) {
  auto s = build_schedule(4);
  Cases cases(17);
  auto x = cases.Normal({4, 1, 3, 3}), yi = cases.Normal({4, 1, 3, 3});
  auto yj = cases.Normal({4, 1, 3, 3}), eps = cases.Normal({4, 1, 3, 3});
  auto t = torch::tensor({4, 1, 3, 2}, torch::kInt64);
  auto intra = intra_target(s, x, yi, t, eps);
  auto inter = inter_target(s, x, yi, yj, t, eps);
  const std::int64_t ts[] = {4, 1, 3, 2};
  for (int b = 0; b < 4; ++b) {
    EXPECT_LE(MaxAbs(intra[b], intra_target(s, x[b], yi[b], ts[b], eps[b])), kExact);
    EXPECT_LE(MaxAbs(inter[b], inter_target(s, x[b], yi[b], yj[b], ts[b], eps[b])), kExact);
  }
}

TEST(Losses, SymmetryAndZero) {
  auto s = build_schedule(4);
  Cases cases(18);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = cases.Int(1, 4);
    auto x = cases.Normal({3, 3, 4, 4}), yi = cases.Normal({3, 3, 4, 4});
    auto eps = cases.Normal({3, 3, 4, 4}), pred = cases.Normal({3, 3, 4, 4});
    auto intra = intra_loss(intra_target(s, x, yi, t, eps), pred);
    auto inter = inter_loss(inter_target(s, x, yi, yi, t, eps), pred);
    EXPECT_LE((inter + intra).abs().max().item<double>(), kExact);
    auto target = intra_target(s, x, yi, t, eps);
    EXPECT_EQ(intra_loss(target, target).abs().max().item<double>(), 0.0);
  }
}

TEST(Losses, MeanL1IsPerElementMean) {
  auto a = torch::tensor({1.0, -2.0, 3.0, 0.5}, torch::kFloat64).view({1, 1, 2, 2});
  auto b = torch::zeros_like(a);
  EXPECT_NEAR(mean_l1(a, b)[0].item<double>(), 6.5 / 4, kExact);
}

TEST(ConfusingClass, Examples) {
  auto book = generate_codebook(5, {3, 8, 8}, {}, 2);
  EXPECT_EQ(confusing_class(book.labels[2], book, 0), 2);
  Cases cases(19);
  for (std::int64_t i = 0; i < 5; ++i) {
    EXPECT_EQ(confusing_class(book.labels[i], book, i),
              BruteArgmin(BruteDistances(book.labels[i], book), i));
  }
  for (int trial = 0; trial < 50; ++trial) {
    auto sample = cases.Uniform({3, 8, 8}, -1, 1);
    const auto truth = cases.Int(0, 4);
    EXPECT_EQ(confusing_class(sample, book, truth), BruteArgmin(BruteDistances(sample, book), truth));
  }
  auto single = generate_codebook(1, {1, 4, 4}, {}, 0);
  EXPECT_THROW(confusing_class(single.labels[0], single, 0), std::invalid_argument);
}

TEST(ClassificationLoss, AlphaZeroIsIntra) {
  auto s = build_schedule(4);
  auto book = generate_codebook(3, {1, 4, 4}, {}, 0);
  testing::ConstantPredictor pred(0.2);
  Cases cases(20);
  auto x = cases.Uniform({6, 1, 4, 4}, -1, 1);
  auto gen = MakeGenerator(3);
  auto terms = classification_loss(s, pred, x, {0, 1, 2, 0, 1, 2}, book, {0.0, {}}, gen);
  EXPECT_NEAR(terms.total.item<double>(), terms.intra, kExact);
  EXPECT_EQ(pred.calls(), 1);
}

TEST(ClassificationLoss, OracleLeavesOnlyInterTerm) {
  auto s = build_schedule(4);
  auto book = generate_codebook(4, {1, 4, 4}, {}, 1);
  Cases cases(21);
  const std::vector<std::int64_t> classes{0, 1, 2, 3, 1};
  auto x = cases.Uniform({5, 1, 4, 4}, -1, 1);
  auto y0 = book.labels.to(torch::kFloat64).index_select(0, torch::tensor(classes));
  OraclePredictor oracle(y0);
  const double alpha = 0.2;
  auto gen = MakeGenerator(4);
  auto terms = classification_loss(s, oracle, x, classes, book, {alpha, {}}, gen);
  EXPECT_LE(std::abs(terms.intra), kExact);

  // Replay the draws to build both targets independently.
  auto replay = MakeGenerator(4);
  auto t = torch::randint(1, 5, {5}, replay, torch::kInt64);
  auto eps = torch::randn({5, 1, 4, 4}, replay, torch::kFloat64);
  double expected = 0.0;
  for (int b = 0; b < 5; ++b) {
    const auto tb = t[b].item<std::int64_t>();
    const auto j = BruteArgmin(BruteDistances(y0[b], book), classes[b]);
    auto yj = book.labels.to(torch::kFloat64)[j];
    auto diff = inter_target(s, x[b], y0[b], yj, tb, eps[b]) - intra_target(s, x[b], y0[b], tb, eps[b]);
    expected += -alpha * diff.abs().mean().item<double>();
  }
  EXPECT_NEAR(terms.total.item<double>(), expected / 5, kExact);
}

TEST(ClassificationLoss, SingleSampleStepByStep) {
  auto s = build_schedule(4);
  auto book = generate_codebook(2, {1, 4, 4}, {}, 3);
  testing::ConstantPredictor pred(0.05);
  Cases cases(22);
  auto x = cases.Uniform({1, 1, 4, 4}, -1, 1);
  const double alpha = 0.2;
  auto gen = MakeGenerator(9);
  auto terms = classification_loss(s, pred, x, {1}, book, {alpha, {}}, gen);

  auto replay = MakeGenerator(9);
  const auto t = torch::randint(1, 5, {1}, replay, torch::kInt64).item<std::int64_t>();
  auto eps = torch::randn({1, 1, 4, 4}, replay, torch::kFloat64);
  auto labels = book.labels.to(torch::kFloat64);
  auto xs = x.flatten(), es = eps.flatten(), l0 = labels[0].flatten(), l1 = labels[1].flatten();
  const double mt = s.m[t], mp = s.m[t - 1], sd = std::sqrt(s.delta[t]);
  double intra = 0, inter = 0, d0 = 0, d1 = 0;
  for (std::int64_t p = 0; p < 16; ++p) {
    const double xv = xs[p].item<double>(), ev = es[p].item<double>();
    const double yi = l1[p].item<double>(), yj = l0[p].item<double>();
    const double y_t = (1 - mt) * yi + mt * xv + sd * ev;
    const double y0_hat = y_t - 0.05;
    d0 += std::abs(y0_hat - yj);
    d1 += std::abs(y0_hat - yi);
    intra += std::abs(mt * (xv - yi) + sd * ev - 0.05);
    inter += std::abs(mt * (xv - yj) + mp * (yj - yi) + sd * ev - 0.05);
  }
  intra /= 16;
  inter = -inter / 16;
  EXPECT_EQ(terms.confusing[0], 0);
  EXPECT_NEAR(terms.intra, intra, kExact);
  EXPECT_NEAR(terms.inter, inter, kExact);
  EXPECT_NEAR(terms.margin, d0 - d1, 1e-9);
  EXPECT_NEAR(terms.total.item<double>(), intra + alpha * inter, kExact);
}

TEST(ClassificationLoss, HingeClampsInterTerm) {
  auto s = build_schedule(4);
  auto book = generate_codebook(3, {1, 4, 4}, {}, 0);
  testing::ConstantPredictor pred(0.0);
  Cases cases(23);
  auto x = cases.Uniform({4, 1, 4, 4}, -1, 1);
  auto g = MakeGenerator(2);
  auto terms = classification_loss(s, pred, x, {0, 1, 2, 0}, book, {0.2, 1e-4}, g);
  EXPECT_NEAR(terms.inter, -1e-4, kExact);
}

TEST(ClassificationLoss, RejectsBadInput) {
  auto s = build_schedule(4);
  auto book = generate_codebook(3, {1, 4, 4}, {}, 0);
  testing::ConstantPredictor pred(0.0);
  auto g = MakeGenerator(2);
  auto x = torch::zeros({2, 1, 4, 4}, torch::kFloat64);
  EXPECT_THROW(classification_loss(s, pred, x, {0}, book, {}, g), std::invalid_argument);
  EXPECT_THROW(classification_loss(s, pred, x, {0, 1}, book, {-1.0, {}}, g), std::invalid_argument);
}

// Central differences along random parameter directions, float64.
TEST(ClassificationLoss, GradientMatchesFiniteDifferences) {
  auto toy = testing::MakeToyBundle(3, 31);
  const auto& b = toy.bundle;
  Cases cases(24);
  auto x = cases.Uniform({3, 1, 4, 4}, -1, 1);
  const std::vector<std::int64_t> classes{0, 2, 1};
  auto params = toy.net->parameters();
  auto loss_at = [&]() {
    auto g = MakeGenerator(77);
    return classification_loss(b.schedule, *toy.net, x, classes, b.codebook, {0.2, {}}, g).total;
  };
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  loss_at().backward();
  std::vector<torch::Tensor> grads;
  for (auto& p : params) grads.push_back(p.grad().clone());

  for (int dir = 0; dir < 5; ++dir) {
    std::vector<torch::Tensor> v;
    double analytic = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      v.push_back(cases.Normal(params[i].sizes().vec()));
      analytic += (grads[i] * v.back()).sum().item<double>();
    }
    const double h = 1e-6;
    auto shift = [&](double sign) {
      torch::NoGradGuard ng;
      for (std::size_t i = 0; i < params.size(); ++i) params[i].add_(sign * h * v[i]);
    };
    double plus, minus;
    {
      torch::NoGradGuard ng;
      shift(1);
      plus = loss_at().item<double>();
      shift(-2);
      minus = loss_at().item<double>();
      shift(1);
    }
    const double numeric = (plus - minus) / (2 * h);
    EXPECT_LE(testing::RelErr(analytic, numeric), 1e-3) << analytic << " vs " << numeric;
  }
}

}  // namespace
}  // namespace idc

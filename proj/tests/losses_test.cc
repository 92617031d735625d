/*
 * Copyright 2026 The RNF Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rnf/losses.h"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.h"

namespace rnf::losses {
namespace {

using nn::Layer;
using nn::Model;
using testing::NaiveSoftmax;
using testing::RandomMatrix;
using testing::RandomProbabilities;

Model RandomHeadModel(Rng& rng, uint64_t seed, double dropout = 0.0) {
  Model m = Model::Initialized({3, 6, 5, 2}, 1, dropout, seed);
  for (Layer& layer : m.mutable_layers()) {
    layer.bias = RandomMatrix(rng, layer.bias.size(), 1, 0.5);
  }
  return m;
}

TEST(SoftmaxTemperatureTest, MatchesNaiveOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector logits = RandomMatrix(rng, 3, 1, 4.0);
    const double t = 1.0 + 3.0 * rng.Uniform();
    const Vector p = SoftmaxTemperature(logits, t);
    const auto expect = NaiveSoftmax(testing::ToStd(logits), t);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], expect[i], 1e-14);
  }
}

TEST(SoftmaxTemperatureTest, RejectsTemperatureBelowOne) {
  EXPECT_THROW(SoftmaxTemperature(Vector(Vector::Zero(2)), 0.5), ConfigError);
  EXPECT_NO_THROW(SoftmaxTemperature(Vector(Vector::Zero(2)), 1.0));
}

TEST(SoftmaxTemperatureTest, HigherTemperatureFlattens) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector logits = RandomMatrix(rng, 2, 1, 3.0);
    const double lo = SoftmaxTemperature(logits, 1.0).maxCoeff();
    const double hi = SoftmaxTemperature(logits, 2.5).maxCoeff();
    EXPECT_LE(hi, lo + 1e-15);
    EXPECT_GE(hi, 0.5);
  }
}

TEST(SoftmaxBackwardTest, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix logits = RandomMatrix(rng, 2, 3, 2.0);
    const Matrix weights = RandomMatrix(rng, 2, 3);
    const double t = 1.0 + rng.Uniform();
    auto f = [&](const Matrix& l) {
      return SoftmaxTemperature(l, t).cwiseProduct(weights).sum();
    };
    const Matrix analytic =
        SoftmaxBackward(SoftmaxTemperature(logits, t), weights, t);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const double keep = logits.data()[i];
      logits.data()[i] = keep + 1e-6;
      const double up = f(logits);
      logits.data()[i] = keep - 1e-6;
      const double down = f(logits);
      logits.data()[i] = keep;
      EXPECT_NEAR(analytic.data()[i], (up - down) / 2e-6, 1e-8);
    }
  }
}

TEST(CrossEntropyTest, ValueAndGradient) {
  Vector p(2);
  p << 0.25, 0.75;
  const LossGrad r = CrossEntropy(p, 1);
  EXPECT_NEAR(r.loss, -std::log(0.75), 1e-15);
  EXPECT_NEAR(r.grad[0], 0.25, 1e-15);
  EXPECT_NEAR(r.grad[1], -0.25, 1e-15);
  EXPECT_FALSE(r.clamped);
  EXPECT_THROW(CrossEntropy(p, 2), std::exception);
}

TEST(CrossEntropyTest, ClampsTinyProbabilities) {
  Vector p(2);
  p << 1.0, 0.0;
  const LossGrad r = CrossEntropy(p, 1);
  EXPECT_TRUE(r.clamped);
  EXPECT_NEAR(r.loss, -std::log(kProbabilityFloor), 1e-9);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(GceTest, GradientIsScaledCrossEntropyGradient) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector p = RandomProbabilities(rng, 1, 3).row(0).transpose();
    const int y = static_cast<int>(rng.Below(3));
    const double q = 0.05 + 0.95 * rng.Uniform();
    const LossGrad gce = GeneralizedCrossEntropy(p, y, {q});
    const LossGrad ce = CrossEntropy(p, y);
    EXPECT_NEAR(gce.loss, (1.0 - std::pow(p[y], q)) / q, 1e-12);
    EXPECT_TRUE(gce.grad.isApprox(std::pow(p[y], q) * ce.grad, 1e-12));
  }
}

TEST(GceTest, LimitsInQ) {
  Vector p(2);
  p << 0.3, 0.7;
  // q -> 0 recovers cross-entropy; q = 1 is the MAE-like 1 - p_y.
  EXPECT_NEAR(GeneralizedCrossEntropy(p, 1, {1e-9}).loss, -std::log(0.7), 1e-8);
  EXPECT_NEAR(GeneralizedCrossEntropy(p, 1, {1.0}).loss, 0.3, 1e-15);
  EXPECT_THROW(GeneralizedCrossEntropy(p, 1, {0.0}), ConfigError);
  EXPECT_THROW(GeneralizedCrossEntropy(p, 1, {1.5}), ConfigError);
}

TEST(GceTest, BatchGradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix logits = RandomMatrix(rng, 4, 2, 2.0);
    std::vector<int> y(4);
    for (int& v : y) v = static_cast<int>(rng.Below(2));
    const GceConfig cfg{0.6};
    auto f = [&](const Matrix& l) {
      return GceBatch(nn::Softmax(l), y, cfg).loss;
    };
    const Matrix analytic = GceBatch(nn::Softmax(logits), y, cfg).d_logits;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const double keep = logits.data()[i];
      logits.data()[i] = keep + 1e-6;
      const double up = f(logits);
      logits.data()[i] = keep - 1e-6;
      const double down = f(logits);
      logits.data()[i] = keep;
      EXPECT_NEAR(analytic.data()[i], (up - down) / 2e-6, 1e-8);
    }
  }
}

TEST(RnfMseTest, ValueAndGradient) {
  Vector a(2), b(2);
  a << 0.2, 0.8;
  b << 0.5, 0.5;
  const LossGrad r = RnfMse(a, b);
  EXPECT_NEAR(r.loss, 0.18, 1e-15);
  EXPECT_NEAR(r.grad[0], -0.6, 1e-15);
  EXPECT_NEAR(r.grad[1], 0.6, 1e-15);
}

TEST(NeutralizedMseTest, ValueMatchesDefinition) {
  Rng rng(6);
  const Model m = RandomHeadModel(rng, 7);
  const Matrix z1 = RandomMatrix(rng, 5, 6);
  const Matrix z2 = RandomMatrix(rng, 5, 6);
  const Matrix p1 = RandomProbabilities(rng, 5);
  const Matrix p2 = RandomProbabilities(rng, 5);
  HeadOptions opts;
  opts.temperature = 2.0;
  const HeadLoss l = NeutralizedMseLoss(m, z1, z2, p1, p2, opts);
  double expect = 0.0;
  for (int r = 0; r < 5; ++r) {
    const Vector mid = 0.5 * (z1.row(r) + z2.row(r)).transpose();
    const Vector out =
        SoftmaxTemperature(Vector(nn::HeadLogits(m, Matrix(mid.transpose()))
                                      .row(0)
                                      .transpose()),
                           2.0);
    const Vector target = 0.5 * (p1.row(r) + p2.row(r)).transpose();
    expect += (out - target).squaredNorm();
  }
  EXPECT_NEAR(l.loss, expect / 5.0, 1e-14);
}

TEST(NeutralizedMseTest, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const bool train = trial % 2 == 1;
    const Model m = RandomHeadModel(rng, 50 + trial, train ? 0.3 : 0.0);
    const Matrix z1 = RandomMatrix(rng, 4, 6);
    const Matrix z2 = RandomMatrix(rng, 4, 6);
    const Matrix p1 = RandomProbabilities(rng, 4);
    const Matrix p2 = RandomProbabilities(rng, 4);
    HeadOptions opts;
    opts.temperature = 1.0 + trial % 3;
    opts.mode = train ? nn::Mode::kTrain : nn::Mode::kEval;
    opts.seed = 17 + trial;
    auto f = [&](const Model& mm) {
      return NeutralizedMseLoss(mm, z1, z2, p1, p2, opts).loss;
    };
    const HeadLoss l = NeutralizedMseLoss(m, z1, z2, p1, p2, opts);
    EXPECT_FALSE(l.gradients.layers[0].has_value());
    EXPECT_LE(testing::RelativeError(testing::FlattenGradients(l.gradients, 1),
                                     testing::NumericParamGradient(m, 1, f)),
              1e-5)
        << trial;
  }
}

TEST(NeutralizedMseTest, LastLayerScope) {
  Rng rng(9);
  const Model m = RandomHeadModel(rng, 3);
  const Matrix z1 = RandomMatrix(rng, 4, 6), z2 = RandomMatrix(rng, 4, 6);
  const Matrix p1 = RandomProbabilities(rng, 4), p2 = RandomProbabilities(rng, 4);
  HeadOptions opts;
  opts.first_trainable = 2;
  const HeadLoss l = NeutralizedMseLoss(m, z1, z2, p1, p2, opts);
  EXPECT_FALSE(l.gradients.layers[1].has_value());
  auto f = [&](const Model& mm) {
    return NeutralizedMseLoss(mm, z1, z2, p1, p2, opts).loss;
  };
  EXPECT_LE(testing::RelativeError(testing::FlattenGradients(l.gradients, 2),
                                   testing::NumericParamGradient(m, 2, f)),
            1e-6);
}

TEST(SmoothLossTest, ValueMatchesDefinition) {
  Rng rng(10);
  const Model m = RandomHeadModel(rng, 11);
  const Matrix z1 = RandomMatrix(rng, 3, 6);
  const Matrix z2 = RandomMatrix(rng, 3, 6);
  const std::vector<double> lambdas = {0.6, 0.7, 0.8, 0.9};
  const HeadLoss l = SmoothLoss(m, z1, z2, lambdas);
  double expect = 0.0;
  for (int r = 0; r < 3; ++r) {
    const Matrix mid = 0.5 * (z1.row(r) + z2.row(r));
    const Matrix c_mid = nn::HeadForward(m, mid);
    for (double lam : lambdas) {
      const Matrix zl = lam * z1.row(r) + (1 - lam) * z2.row(r);
      expect += (nn::HeadForward(m, zl) - c_mid).cwiseAbs().sum();
    }
  }
  EXPECT_NEAR(l.loss, expect / 3.0, 1e-14);
  EXPECT_THROW(SmoothLoss(m, z1, z2, std::vector<double>{}), ConfigError);
}

TEST(SmoothLossTest, VanishesForIdenticalEndpoints) {
  Rng rng(12);
  const Model m = RandomHeadModel(rng, 13);
  const Matrix z = RandomMatrix(rng, 4, 6);
  const std::vector<double> lambdas = {0.6, 0.9};
  EXPECT_NEAR(SmoothLoss(m, z, z, lambdas).loss, 0.0, 1e-15);
}

TEST(SmoothLossTest, GradientMatchesFiniteDifferences) {
  Rng rng(14);
  const std::vector<double> lambdas = {0.6, 0.7, 0.8, 0.9};
  for (int trial = 0; trial < 40; ++trial) {
    const Model m = RandomHeadModel(rng, 200 + trial);
    const Matrix z1 = RandomMatrix(rng, 3, 6, 2.0);
    const Matrix z2 = RandomMatrix(rng, 3, 6, 2.0);
    HeadOptions opts;
    opts.temperature = 1.0 + trial % 2;
    auto f = [&](const Model& mm) {
      return SmoothLoss(mm, z1, z2, lambdas, opts).loss;
    };
    const HeadLoss l = SmoothLoss(m, z1, z2, lambdas, opts);
    EXPECT_LE(testing::RelativeError(testing::FlattenGradients(l.gradients, 1),
                                     testing::NumericParamGradient(m, 1, f)),
              1e-5)
        << trial;
  }
}

TEST(CombinedLossTest, IsMsePlusAlphaSmooth) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = RandomHeadModel(rng, 300 + trial);
    const Matrix z1 = RandomMatrix(rng, 4, 6), z2 = RandomMatrix(rng, 4, 6);
    const Matrix p1 = RandomProbabilities(rng, 4);
    const Matrix p2 = RandomProbabilities(rng, 4);
    RnfLossConfig cfg;
    cfg.alpha = 2.0 * rng.Uniform();
    cfg.temperature = 2.0;
    HeadOptions opts;
    opts.temperature = cfg.temperature;
    const CombinedLoss c = CombinedRnfLoss(m, z1, z2, p1, p2, cfg);
    const HeadLoss mse = NeutralizedMseLoss(m, z1, z2, p1, p2, opts);
    const HeadLoss smooth = SmoothLoss(m, z1, z2, cfg.lambda_set, opts);
    EXPECT_NEAR(c.mse, mse.loss, 1e-14);
    EXPECT_NEAR(c.smooth, smooth.loss, 1e-14);
    EXPECT_NEAR(c.total, mse.loss + cfg.alpha * smooth.loss, 1e-14);
    nn::Gradients expect = mse.gradients;
    expect.Add(smooth.gradients, cfg.alpha);
    EXPECT_LE(testing::RelativeError(testing::FlattenGradients(c.gradients, 1),
                                     testing::FlattenGradients(expect, 1)),
              1e-14);
  }
}

TEST(CombinedLossTest, RejectsBadConfig) {
  RnfLossConfig cfg;
  cfg.alpha = -1.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = {};
  cfg.temperature = 0.5;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = {};
  cfg.lambda_set = {};
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

TEST(MultiGroupSmoothTest, TwoGroupsReduceToPairTerm) {
  Rng rng(16);
  const Model m = RandomHeadModel(rng, 17);
  const Matrix z1 = RandomMatrix(rng, 1, 6), z2 = RandomMatrix(rng, 1, 6);
  const std::vector<Vector> zs = {z1.row(0).transpose(), z2.row(0).transpose()};
  const std::vector<double> weights = {0.7, 0.3};
  const std::vector<double> single = {0.7};
  EXPECT_NEAR(MultiGroupSmooth(m, zs, weights),
              SmoothLoss(m, z1, z2, single).loss, 1e-14);
  // Uniform weights collapse onto the mean.
  const std::vector<double> equal = {0.4, 0.4};
  EXPECT_NEAR(MultiGroupSmooth(m, zs, equal), 0.0, 1e-15);
}

TEST(MultiGroupSmoothTest, RejectsBadWeights) {
  const Model m = Model::Initialized({3, 6, 5, 2}, 1, 0.0, 1);
  const std::vector<Vector> one = {Vector::Zero(6)};
  const std::vector<Vector> two = {Vector::Zero(6), Vector::Ones(6)};
  EXPECT_THROW(MultiGroupSmooth(m, one, std::vector<double>{1.0}), ConfigError);
  EXPECT_THROW(MultiGroupSmooth(m, two, std::vector<double>{0.0, 0.0}),
               ConfigError);
  EXPECT_THROW(MultiGroupSmooth(m, two, std::vector<double>{1.5, 0.0}),
               ConfigError);
}

TEST(LossExamplesTest, ClosedForms) {
  Vector logits(2);
  logits << std::log(4.0), 0.0;
  const Vector t1 = SoftmaxTemperature(logits, 1.0);
  const Vector t2 = SoftmaxTemperature(logits, 2.0);
  EXPECT_NEAR(t1[0], 0.8, 1e-12);
  EXPECT_NEAR(t2[0], 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(t2[1], 1.0 / 3.0, 1e-9);
  const Vector flat = SoftmaxTemperature(Vector(Vector::Zero(2)), 3.0);
  EXPECT_EQ(flat[0], 0.5);

  Vector p(2);
  p << 0.5, 0.5;
  EXPECT_NEAR(CrossEntropy(p, 0).loss, std::log(2.0), 1e-15);
  p << 0.0, 1.0;
  EXPECT_EQ(CrossEntropy(p, 1).loss, 0.0);
  EXPECT_TRUE(CrossEntropy(p, 1).grad.isZero());
  EXPECT_EQ(GeneralizedCrossEntropy(p, 1, {0.2}).loss, 0.0);
  p << 0.75, 0.25;
  EXPECT_NEAR(GeneralizedCrossEntropy(p, 1, {0.5}).loss, 1.0, 1e-12);
  p << 0.7, 0.3;
  EXPECT_LT(std::abs(GeneralizedCrossEntropy(p, 1, {1e-6}).loss +
                     std::log(0.3)),
            1e-4);

  Vector out(2), target(2);
  out << 0.9, 0.1;
  target << 0.5, 0.5;
  EXPECT_NEAR(RnfMse(out, target).loss, 0.32, 1e-15);
  EXPECT_EQ(RnfMse(target, target).loss, 0.0);
}

TEST(LossPropertyTest, GceLimitAndArgmaxInvariance) {
  Rng rng(40);
  for (int trial = 0; trial < 200; ++trial) {
    const double py = 0.05 + 0.95 * rng.Uniform();
    Vector p(2);
    p << 1.0 - py, py;
    EXPECT_LT(std::abs(GeneralizedCrossEntropy(p, 1, {1e-6}).loss -
                       CrossEntropy(p, 1).loss),
              1e-4);
    const Vector logits = RandomMatrix(rng, 3, 1, 5.0);
    Eigen::Index a, b;
    logits.maxCoeff(&a);
    SoftmaxTemperature(logits, 1.0 + 9.0 * rng.Uniform()).maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
}

TEST(LossPropertyTest, SwapSymmetriesAndNonNegativity) {
  Rng rng(41);
  const std::vector<double> lambdas = {0.6, 0.7, 0.8, 0.9};
  std::vector<double> mirrored;
  for (double l : lambdas) mirrored.push_back(1.0 - l);
  for (int trial = 0; trial < 30; ++trial) {
    const Model m = RandomHeadModel(rng, 500 + trial);
    const Matrix z1 = RandomMatrix(rng, 3, 6), z2 = RandomMatrix(rng, 3, 6);
    const Matrix p1 = RandomProbabilities(rng, 3);
    const Matrix p2 = RandomProbabilities(rng, 3);
    const double a = NeutralizedMseLoss(m, z1, z2, p1, p2).loss;
    const double b = NeutralizedMseLoss(m, z2, z1, p2, p1).loss;
    EXPECT_NEAR(a, b, 1e-15);
    EXPECT_GE(a, 0.0);
    const double s = SmoothLoss(m, z1, z2, lambdas).loss;
    EXPECT_NEAR(s, SmoothLoss(m, z2, z1, mirrored).loss, 1e-13);
    EXPECT_GE(s, 0.0);
    // The midpoint itself contributes nothing.
    const std::vector<double> half = {0.5};
    EXPECT_NEAR(SmoothLoss(m, z1, z2, half).loss, 0.0, 1e-15);
  }
}

TEST(LossPropertyTest, AlphaZeroAndFixedPoint) {
  Rng rng(42);
  const Model m = RandomHeadModel(rng, 600);
  const Matrix z1 = RandomMatrix(rng, 3, 6), z2 = RandomMatrix(rng, 3, 6);
  const Matrix p1 = RandomProbabilities(rng, 3);
  const Matrix p2 = RandomProbabilities(rng, 3);
  RnfLossConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_EQ(CombinedRnfLoss(m, z1, z2, p1, p2, cfg).total,
            NeutralizedMseLoss(m, z1, z2, p1, p2).loss);
  // Head already reproduces the targets at z1 = z2.
  const Matrix own = nn::HeadForward(m, z1);
  cfg.alpha = 1.0;
  EXPECT_NEAR(CombinedRnfLoss(m, z1, z1, own, own, cfg).total, 0.0, 1e-15);
}

TEST(MultiGroupSmoothTest, ThreeGroupsMatchBruteForce) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = RandomHeadModel(rng, 700 + trial);
    std::vector<Vector> zs;
    for (int k = 0; k < 3; ++k) zs.push_back(RandomMatrix(rng, 6, 1));
    const std::vector<double> w = {rng.Uniform(), rng.Uniform(), rng.Uniform()};
    Vector weighted = Vector::Zero(6), uniform = Vector::Zero(6);
    for (int k = 0; k < 3; ++k) {
      weighted += w[k] * zs[k];
      uniform += zs[k] / 3.0;
    }
    weighted /= (w[0] + w[1] + w[2]);
    const auto c = [&](const Vector& z) {
      return NaiveSoftmax(testing::NaiveRange(m, testing::ToStd(z), 1, 3));
    };
    const auto pw = c(weighted), pu = c(uniform);
    const double expect = std::abs(pw[0] - pu[0]) + std::abs(pw[1] - pu[1]);
    EXPECT_NEAR(MultiGroupSmooth(m, zs, w), expect, 1e-12);
  }
}

}  // namespace
}  // namespace rnf::losses

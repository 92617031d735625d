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

#include "rnf/nn.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rnf/losses.h"
#include "test_util.h"

namespace rnf::nn {
namespace {

using testing::NaiveRange;
using testing::NaiveSoftmax;
using testing::RandomMatrix;
using testing::ToStd;

TEST(ModelTest, RejectsInvalidShapes) {
  EXPECT_THROW(Model({4, 2}, 1, 0.0), ConfigError);
  EXPECT_THROW(Model({4, 3, 2}, 0, 0.0), ConfigError);
  EXPECT_THROW(Model({4, 3, 2}, 2, 0.0), ConfigError);
  EXPECT_THROW(Model({4, 3, 2}, 1, 1.0), ConfigError);
  EXPECT_THROW(Model({4, 0, 2}, 1, 0.0), ConfigError);
  EXPECT_NO_THROW(Model({4, 3, 2}, 1, 0.5));
}

TEST(ModelTest, GlorotInitIsBoundedAndSeeded) {
  const Model a = Model::Initialized({7, 50, 50, 2}, 1, 0.2, 11);
  const Model b = Model::Initialized({7, 50, 50, 2}, 1, 0.2, 11);
  const Model c = Model::Initialized({7, 50, 50, 2}, 1, 0.2, 12);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (const Layer& layer : a.layers()) {
    const double limit =
        std::sqrt(6.0 / (layer.weight.rows() + layer.weight.cols()));
    EXPECT_LE(layer.weight.cwiseAbs().maxCoeff(), limit);
    EXPECT_TRUE(layer.bias.isZero());
  }
  EXPECT_EQ(a.num_parameters(), 7 * 50 + 50 + 50 * 50 + 50 + 50 * 2 + 2);
  EXPECT_EQ(a.representation_dim(), 50);
}

TEST(ModelTest, ReinitializeLeavesLowerLayers) {
  const Model base = Model::Initialized({5, 6, 4, 2}, 1, 0.0, 3);
  Model head = base;
  head.ReinitializeFrom(1, 99);
  EXPECT_TRUE(head.layer(0).weight == base.layer(0).weight);
  EXPECT_FALSE(head.layer(1).weight == base.layer(1).weight);
  // Values of a layer do not depend on where reinitialization started.
  Model all = base;
  all.ReinitializeFrom(0, 99);
  EXPECT_TRUE(all.layer(2).weight == head.layer(2).weight);
}

TEST(ForwardTest, MatchesNaiveOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = Model::Initialized({6, 8, 5, 3}, 1 + trial % 2, 0.2, trial);
    const Matrix x = RandomMatrix(rng, 4, 6);
    const ForwardTrace t = Forward(m, x, Mode::kEval);
    for (int r = 0; r < 4; ++r) {
      const auto logits = NaiveRange(m, ToStd(Vector(x.row(r).transpose())), 0, 3);
      const auto probs = NaiveSoftmax(logits);
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(t.output(r, c), logits[c], 1e-12);
        EXPECT_NEAR(t.probabilities(r, c), probs[c], 1e-12);
      }
    }
  }
}

TEST(ForwardTest, EncodeThenHeadEqualsFullForward) {
  Rng rng(8);
  const Model m = Model::Initialized({6, 8, 5, 2}, 1, 0.2, 4);
  const Matrix x = RandomMatrix(rng, 10, 6);
  const Matrix full = Forward(m, x, Mode::kEval).probabilities;
  EXPECT_TRUE(HeadForward(m, Encode(m, x)).isApprox(full, 1e-14));
  // Same masks in training mode when the seed is shared.
  const Matrix train = Forward(m, x, Mode::kTrain, 77).output;
  const ForwardTrace enc = ForwardRange(m, x, 0, 1, Mode::kTrain, 77);
  EXPECT_TRUE(HeadLogits(m, enc.output, Mode::kTrain, 77) == train);
}

TEST(ForwardTest, DropoutMasksAreInvertedAndSeeded) {
  Rng rng(9);
  const Model m = Model::Initialized({4, 30, 30, 2}, 1, 0.25, 1);
  const Matrix x = RandomMatrix(rng, 50, 4);
  const ForwardTrace a = Forward(m, x, Mode::kTrain, 123);
  const ForwardTrace b = Forward(m, x, Mode::kTrain, 123);
  const ForwardTrace c = Forward(m, x, Mode::kTrain, 124);
  EXPECT_TRUE(a.output == b.output);
  EXPECT_FALSE(a.output == c.output);
  ASSERT_EQ(a.dropout_masks.size(), 3u);
  EXPECT_EQ(a.dropout_masks[2].size(), 0);
  int dropped = 0;
  for (int k = 0; k < 2; ++k) {
    for (Eigen::Index i = 0; i < a.dropout_masks[k].size(); ++i) {
      const double v = a.dropout_masks[k].data()[i];
      EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
      dropped += v == 0.0;
    }
  }
  // 3000 Bernoulli(0.25) draws.
  EXPECT_NEAR(dropped / 3000.0, 0.25, 0.03);
  // Eval mode ignores the seed.
  EXPECT_TRUE(Forward(m, x, Mode::kEval, 1).output ==
              Forward(m, x, Mode::kEval, 2).output);
}

TEST(ForwardTest, RejectsBadInputs) {
  const Model m = Model::Initialized({3, 4, 2}, 1, 0.0, 1);
  EXPECT_THROW(Forward(m, Matrix::Zero(2, 4), Mode::kEval), ShapeError);
  Matrix bad = Matrix::Zero(2, 3);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Forward(m, bad, Mode::kEval), NumericError);
}

TEST(ForwardTest, SoftmaxIsStableForHugeLogits) {
  Matrix logits(1, 2);
  logits << 1000.0, 0.0;
  const Matrix p = Softmax(logits);
  EXPECT_DOUBLE_EQ(p(0, 0), 1.0);
  EXPECT_TRUE(p.allFinite());
}

// CE through the full MLP against central differences, eval and train mode.
TEST(BackwardTest, FullModelMatchesFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const bool train = trial % 2 == 1;
    Model m = Model::Initialized({4, 6, 5, 2}, 1, train ? 0.3 : 0.0,
                                 100 + trial);
    // Nonzero biases keep pre-activations away from the ReLU kink.
    for (Layer& layer : m.mutable_layers()) {
      layer.bias = RandomMatrix(rng, layer.bias.size(), 1, 0.5);
    }
    const Matrix x = RandomMatrix(rng, 5, 4);
    std::vector<int> y(5);
    for (int& v : y) v = static_cast<int>(rng.Below(2));
    const Mode mode = train ? Mode::kTrain : Mode::kEval;
    const uint64_t seed = 900 + trial;
    auto loss = [&](const Model& mm) {
      return losses::CrossEntropyBatch(Forward(mm, x, mode, seed).probabilities,
                                       y)
          .loss;
    };
    const ForwardTrace t = Forward(m, x, mode, seed);
    const losses::BatchLoss l = losses::CrossEntropyBatch(t.probabilities, y);
    const Gradients g = Backward(m, t, l.d_logits, Scope::kAll);
    const Vector analytic = testing::FlattenGradients(g, 0);
    const Vector numeric = testing::NumericParamGradient(m, 0, loss);
    EXPECT_LE(testing::RelativeError(analytic, numeric), 1e-4) << trial;
  }
}

TEST(BackwardTest, InputGradientMatchesFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = Model::Initialized({3, 5, 4, 2}, 1, 0.0, trial);
    for (Layer& layer : m.mutable_layers()) {
      layer.bias = RandomMatrix(rng, layer.bias.size(), 1, 0.5);
    }
    Matrix x = RandomMatrix(rng, 3, 3);
    const std::vector<int> y = {0, 1, 1};
    const ForwardTrace t = Forward(m, x, Mode::kEval);
    const auto l = losses::CrossEntropyBatch(t.probabilities, y);
    const BackwardResult r = BackwardFrom(m, t, l.d_logits, 0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double keep = x.data()[i];
      x.data()[i] = keep + 1e-6;
      const double up =
          losses::CrossEntropyBatch(Forward(m, x, Mode::kEval).probabilities, y)
              .loss;
      x.data()[i] = keep - 1e-6;
      const double down =
          losses::CrossEntropyBatch(Forward(m, x, Mode::kEval).probabilities, y)
              .loss;
      x.data()[i] = keep;
      EXPECT_NEAR(r.input_gradient.data()[i], (up - down) / 2e-6, 1e-6);
    }
  }
}

TEST(BackwardTest, ScopesLimitGradients) {
  Rng rng(3);
  const Model m = Model::Initialized({4, 6, 5, 2}, 1, 0.0, 1);
  const Matrix x = RandomMatrix(rng, 4, 4);
  const ForwardTrace t = Forward(m, x, Mode::kEval);
  const Matrix d = RandomMatrix(rng, 4, 2);
  const Gradients all = Backward(m, t, d, Scope::kAll);
  const Gradients head = Backward(m, t, d, Scope::kHeadOnly);
  const Gradients last = Backward(m, t, d, Scope::kLastLayer);
  EXPECT_TRUE(all.layers[0].has_value());
  EXPECT_FALSE(head.layers[0].has_value());
  EXPECT_TRUE(head.layers[1].has_value());
  EXPECT_FALSE(last.layers[1].has_value());
  EXPECT_TRUE(last.layers[2]->weight == all.layers[2]->weight);
  EXPECT_TRUE(head.layers[1]->weight == all.layers[1]->weight);
}

TEST(BackwardTest, StaleTraceIsRejected) {
  Rng rng(3);
  const Model m = Model::Initialized({4, 6, 5, 2}, 1, 0.0, 1);
  const Model other = Model::Initialized({4, 7, 5, 2}, 1, 0.0, 1);
  const ForwardTrace t = Forward(m, RandomMatrix(rng, 2, 4), Mode::kEval);
  EXPECT_THROW(Backward(other, t, Matrix::Zero(2, 2), Scope::kAll), ShapeError);
  EXPECT_THROW(Backward(m, t, Matrix::Zero(3, 2), Scope::kAll), ShapeError);
}

TEST(AdamTest, FirstStepMovesByLearningRateTimesSign) {
  Model m({2, 2, 2}, 1, 0.0);
  AdamState s = AdamState::For(m, 0.01);
  Gradients g = Gradients::ZerosLike(m, 0);
  g.layers[0]->weight << 3.0, -0.5, 0.0, 1e-3;
  AdamStep(&m, g, &s);
  // m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
  EXPECT_NEAR(m.layer(0).weight(0, 0), -0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(m.layer(0).weight(0, 1), 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(m.layer(0).weight(1, 0), 0.0);
  EXPECT_NEAR(m.layer(0).weight(1, 1), -0.01 * 1e-3 / (1e-3 + 1e-8), 1e-15);
  EXPECT_EQ(s.step, 1);
}

TEST(AdamTest, MatchesHandRolledRecurrence) {
  Model m({1, 1, 1}, 1, 0.0);
  AdamState s = AdamState::For(m, 0.1);
  double w = 0.0, mom = 0.0, vel = 0.0;
  const double grads[] = {1.0, -2.0, 0.5, 0.25};
  for (int t = 1; t <= 4; ++t) {
    Gradients g = Gradients::ZerosLike(m, 0);
    g.layers[0]->weight(0, 0) = grads[t - 1];
    AdamStep(&m, g, &s);
    mom = 0.9 * mom + 0.1 * grads[t - 1];
    vel = 0.999 * vel + 0.001 * grads[t - 1] * grads[t - 1];
    const double mh = mom / (1 - std::pow(0.9, t));
    const double vh = vel / (1 - std::pow(0.999, t));
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(m.layer(0).weight(0, 0), w, 1e-14);
  }
}

TEST(AdamTest, NonFiniteGradientThrowsWithoutUpdating) {
  Model m = Model::Initialized({3, 4, 2}, 1, 0.0, 1);
  const Model before = m;
  AdamState s = AdamState::For(m, 0.01);
  Gradients g = Gradients::ZerosLike(m, 0);
  g.layers[1]->bias[0] = std::numeric_limits<double>::infinity();
  try {
    AdamStep(&m, g, &s);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.where(), 1);
  }
  EXPECT_TRUE(m == before);
}

TEST(AdamTest, AbsentLayersStayFrozen) {
  Rng rng(2);
  Model m = Model::Initialized({3, 4, 4, 2}, 1, 0.0, 1);
  const Model before = m;
  AdamState s = AdamState::For(m, 0.01);
  Gradients g = Gradients::ZerosLike(m, 1);
  g.layers[2]->weight.setConstant(1.0);
  AdamStep(&m, g, &s);
  EXPECT_TRUE(m.layer(0).weight == before.layer(0).weight);
  EXPECT_FALSE(m.layer(2).weight == before.layer(2).weight);
}

}  // namespace
}  // namespace rnf::nn

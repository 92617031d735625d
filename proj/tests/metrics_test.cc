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

#include "rnf/metrics.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "rnf/common.h"

namespace rnf::metrics {
namespace {

// Brute-force oracles: filter the cell, then count.
struct Instance {
  std::vector<int> preds, labels, groups;
  std::vector<double> probs;
};

Instance RandomInstance(Rng& rng) {
  Instance in;
  const int n = 1 + static_cast<int>(rng.Below(100));
  for (int i = 0; i < n; ++i) {
    in.labels.push_back(static_cast<int>(rng.Below(2)));
    in.groups.push_back(static_cast<int>(rng.Below(2)));
    in.preds.push_back(static_cast<int>(rng.Below(2)));
    in.probs.push_back(rng.Uniform());
  }
  return in;
}

std::vector<int> Cell(const Instance& in, int a, std::optional<int> y) {
  std::vector<int> idx;
  for (size_t i = 0; i < in.labels.size(); ++i) {
    if (in.groups[i] == a && (!y || in.labels[i] == *y)) {
      idx.push_back(static_cast<int>(i));
    }
  }
  return idx;
}

double PositiveRate(const Instance& in, const std::vector<int>& idx) {
  const auto pos = std::count_if(idx.begin(), idx.end(),
                                 [&](int i) { return in.preds[i] == 1; });
  return static_cast<double>(pos) / static_cast<double>(idx.size());
}

double CellMean(const Instance& in, const std::vector<int>& idx, bool desired) {
  double s = 0.0;
  for (int i : idx) s += desired ? in.probs[i] : 1.0 - in.probs[i];
  return s / static_cast<double>(idx.size());
}

TEST(MetricsOracleTest, RandomInstancesMatchCountingExactly) {
  Rng rng(2026);
  int defined_dp = 0, defined_eo = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = RandomInstance(rng);
    const auto g0 = Cell(in, 0, std::nullopt), g1 = Cell(in, 1, std::nullopt);

    if (g0.empty() || g1.empty()) {
      EXPECT_THROW(DemographicParity(in.preds, in.groups),
                   std::invalid_argument);
    } else {
      const auto dp = DemographicParity(in.preds, in.groups);
      if (PositiveRate(in, g1) == 0.0) {
        EXPECT_FALSE(dp.has_value());
      } else {
        ASSERT_TRUE(dp.has_value());
        EXPECT_EQ(*dp, PositiveRate(in, g0) / PositiveRate(in, g1));
        ++defined_dp;
      }
    }

    const auto c00 = Cell(in, 0, 0), c01 = Cell(in, 0, 1);
    const auto c10 = Cell(in, 1, 0), c11 = Cell(in, 1, 1);
    const bool cells = !c00.empty() && !c01.empty() && !c10.empty() &&
                       !c11.empty();
    std::string empty;
    const auto eo = EqualizedOdds(in.preds, in.labels, in.groups, &empty);
    if (cells) {
      ASSERT_TRUE(eo.has_value());
      EXPECT_EQ(*eo, (PositiveRate(in, c01) - PositiveRate(in, c11)) +
                         (PositiveRate(in, c00) - PositiveRate(in, c10)));
      ++defined_eo;
    } else {
      EXPECT_FALSE(eo.has_value());
      EXPECT_FALSE(empty.empty());
    }

    int correct = 0;
    for (size_t i = 0; i < in.preds.size(); ++i) {
      if (in.preds[i] == in.labels[i]) ++correct;
    }
    EXPECT_EQ(Accuracy(in.preds, in.labels),
              static_cast<double>(correct) / in.preds.size());

    const ConfidenceGap gap = ConfidenceGaps(in.probs, in.labels, in.groups);
    EXPECT_EQ(gap.counts[0][0], static_cast<int>(c00.size()));
    EXPECT_EQ(gap.counts[1][1], static_cast<int>(c11.size()));
    if (!c01.empty() && !c11.empty()) {
      EXPECT_EQ(*gap.gap_desired,
                CellMean(in, c11, true) - CellMean(in, c01, true));
    } else {
      EXPECT_FALSE(gap.gap_desired.has_value());
    }
    if (!c00.empty() && !c10.empty()) {
      EXPECT_EQ(*gap.gap_undesired,
                CellMean(in, c00, false) - CellMean(in, c10, false));
    } else {
      EXPECT_FALSE(gap.gap_undesired.has_value());
    }
  }
  // The generator must actually exercise the defined branches.
  EXPECT_GT(defined_dp, 150);
  EXPECT_GT(defined_eo, 150);
}

TEST(MetricsTest, WorkedExamples) {
  const std::vector<int> p1 = {1, 0, 1, 1}, g1 = {0, 0, 1, 1};
  EXPECT_EQ(*DemographicParity(p1, g1), 0.5);
  const std::vector<int> y = {1, 1, 0, 0, 1, 0}, a = {0, 0, 0, 1, 1, 1};
  const std::vector<int> yhat = {1, 0, 0, 1, 1, 1};
  EXPECT_EQ(*EqualizedOdds(yhat, y, a), -1.5);
  EXPECT_EQ(Accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 0, 1, 0}),
            0.75);
  EXPECT_EQ(Accuracy(std::vector<int>{1, 1}, std::vector<int>{0, 0}), 0.0);
  // Desired-label means 0.9 (privileged) and 0.7.
  const ConfidenceGap gap = ConfidenceGaps(std::vector<double>{0.7, 0.9, 0.5, 0.5},
                                           std::vector<int>{1, 1, 0, 0},
                                           std::vector<int>{0, 1, 0, 1});
  EXPECT_NEAR(*gap.gap_desired, 0.2, 1e-15);
  EXPECT_EQ(*gap.gap_undesired, 0.0);
}

TEST(MetricsTest, FairnessFixedPoints) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Instance in = RandomInstance(rng);
    if (Cell(in, 0, 0).empty() || Cell(in, 0, 1).empty() ||
        Cell(in, 1, 0).empty() || Cell(in, 1, 1).empty()) {
      continue;
    }
    EXPECT_EQ(*EqualizedOdds(in.labels, in.labels, in.groups), 0.0);
    const std::vector<int> ones(in.labels.size(), 1);
    EXPECT_EQ(*DemographicParity(ones, in.groups), 1.0);
    const std::vector<double> flat(in.labels.size(), 0.42);
    const ConfidenceGap gap = ConfidenceGaps(flat, in.labels, in.groups);
    EXPECT_NEAR(*gap.gap_desired, 0.0, 1e-15);
    EXPECT_NEAR(*gap.gap_undesired, 0.0, 1e-15);
  }
}

TEST(MetricsTest, GroupSwapNegatesEoAndInvertsDp) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Instance in = RandomInstance(rng);
    std::vector<int> swapped = in.groups;
    for (int& g : swapped) g = 1 - g;
    const auto eo = EqualizedOdds(in.preds, in.labels, in.groups);
    if (eo) {
      EXPECT_NEAR(*EqualizedOdds(in.preds, in.labels, swapped), -*eo, 1e-15);
    }
    if (Cell(in, 0, std::nullopt).empty() || Cell(in, 1, std::nullopt).empty()) {
      continue;
    }
    const auto dp = DemographicParity(in.preds, in.groups);
    const auto inv = DemographicParity(in.preds, swapped);
    if (dp && inv && *dp > 0.0) EXPECT_NEAR(*inv, 1.0 / *dp, 1e-12);
  }
}

TEST(MetricsTest, PermutationInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    Instance in = RandomInstance(rng);
    Instance perm = in;
    std::vector<int> order(in.preds.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.Below(i)]);
    }
    for (size_t i = 0; i < order.size(); ++i) {
      perm.preds[i] = in.preds[order[i]];
      perm.labels[i] = in.labels[order[i]];
      perm.groups[i] = in.groups[order[i]];
    }
    EXPECT_EQ(Accuracy(in.preds, in.labels), Accuracy(perm.preds, perm.labels));
    const auto a = EqualizedOdds(in.preds, in.labels, in.groups);
    const auto b = EqualizedOdds(perm.preds, perm.labels, perm.groups);
    EXPECT_EQ(a.has_value(), b.has_value());
    if (a) EXPECT_EQ(*a, *b);
  }
}

TEST(MetricsTest, UndefinedAndInvalidInputs) {
  // Privileged group never receives the desired outcome.
  EXPECT_FALSE(DemographicParity(std::vector<int>{1, 1, 0, 0},
                                 std::vector<int>{0, 0, 1, 1})
                   .has_value());
  EXPECT_THROW(DemographicParity(std::vector<int>{1, 0}, std::vector<int>{0, 0}),
               std::invalid_argument);
  std::string cell;
  EXPECT_FALSE(EqualizedOdds(std::vector<int>{1, 0, 1},
                             std::vector<int>{1, 0, 1},
                             std::vector<int>{0, 0, 1}, &cell)
                   .has_value());
  EXPECT_EQ(cell, "a=1,y=0");
  EXPECT_THROW(Accuracy(std::vector<int>{}, std::vector<int>{}),
               std::invalid_argument);
  EXPECT_THROW(ConfidenceGaps(std::vector<double>{1.5}, std::vector<int>{1},
                              std::vector<int>{0}),
               std::invalid_argument);
  EXPECT_THROW(DemographicParity(std::vector<int>{1}, std::vector<int>{2}),
               std::invalid_argument);
}

TEST(MetricsTest, HardPredictionBreaksTiesLow) {
  Vector p(2);
  p << 0.5, 0.5;
  EXPECT_EQ(HardPrediction(p), 0);
  p << 0.49, 0.51;
  EXPECT_EQ(HardPrediction(p), 1);
}

TEST(MetricsTest, ComputeMetricsFlagsUndefined) {
  Matrix probs(4, 2);
  probs << 0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4;
  const std::vector<int> labels = {0, 1, 0, 1}, groups = {0, 0, 1, 1};
  const MetricsRecord r = ComputeMetrics(probs, labels, groups);
  EXPECT_EQ(r.accuracy, 0.5);
  EXPECT_FALSE(r.dp.has_value());
  EXPECT_TRUE(r.delta_eo.has_value());
  EXPECT_EQ(r.undefined_flags, "dp");
  EXPECT_FALSE(r.all_defined());
  EXPECT_THROW(ComputeMetrics(Matrix::Zero(3, 2), labels, groups), ShapeError);
}

}  // namespace
}  // namespace rnf::metrics

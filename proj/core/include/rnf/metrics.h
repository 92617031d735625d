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

// Group fairness metrics for binary labels and binary groups.
//
// Group 0 is the unprivileged group, group 1 the privileged one, label 1 the
// desired outcome. Metrics that cannot be computed (empty cell, zero
// denominator) are returned as std::nullopt rather than thrown, so sweeps can
// skip them.

#ifndef RNF_METRICS_H_
#define RNF_METRICS_H_

#include <array>
#include <optional>
#include <span>
#include <string>

#include "rnf/common.h"

namespace rnf::metrics {

// p(yhat=1 | a=0) / p(yhat=1 | a=1). Throws std::invalid_argument when either
// group is empty; nullopt when the privileged rate is zero.
std::optional<double> DemographicParity(std::span<const int> preds,
                                        std::span<const int> groups);

// (TPR_0 - TPR_1) + (FPR_0 - FPR_1). nullopt when any (group, label) cell is
// empty; `empty_cell` then names it, e.g. "a=0,y=1".
std::optional<double> EqualizedOdds(std::span<const int> preds,
                                    std::span<const int> labels,
                                    std::span<const int> groups,
                                    std::string* empty_cell = nullptr);

double Accuracy(std::span<const int> preds, std::span<const int> labels);

struct ConfidenceGap {
  // Mean desired-class probability per [group][label]; nullopt for empty cells.
  std::array<std::array<std::optional<double>, 2>, 2> mean_desired{};
  std::array<std::array<int, 2>, 2> counts{};
  // Privileged minus unprivileged desired-class mean among y = 1.
  std::optional<double> gap_desired;
  // Unprivileged minus privileged less-desired-class mean among y = 0.
  std::optional<double> gap_undesired;
};

ConfidenceGap ConfidenceGaps(std::span<const double> desired_probs,
                             std::span<const int> labels,
                             std::span<const int> groups);

// Argmax with ties resolved toward the lower class index.
int HardPrediction(const Vector& probs);

struct MetricsRecord {
  double accuracy = 0.0;
  std::optional<double> dp;
  std::optional<double> delta_eo;
  ConfidenceGap confidence;
  // Names of undefined metrics joined with '|', empty when all are defined.
  std::string undefined_flags;

  bool all_defined() const { return undefined_flags.empty(); }
};

// All metrics from class probabilities (n x 2) on a split.
MetricsRecord ComputeMetrics(const Matrix& probabilities,
                             std::span<const int> labels,
                             std::span<const int> groups);

}  // namespace rnf::metrics

#endif  // RNF_METRICS_H_

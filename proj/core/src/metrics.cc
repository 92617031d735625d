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

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace rnf::metrics {
namespace {

void CheckGroupIndex(int g) {
  if (g != 0 && g != 1) {
    throw std::invalid_argument("group indices must be 0 or 1");
  }
}

void CheckLabel(int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
}

void AddFlag(std::string* flags, const char* name) {
  if (!flags->empty()) *flags += "|";
  *flags += name;
}

}  // namespace

std::optional<double> DemographicParity(std::span<const int> preds,
                                        std::span<const int> groups) {
  if (preds.size() != groups.size()) {
    throw std::invalid_argument("preds and groups differ in length");
  }
  std::array<int, 2> members{};
  std::array<int, 2> positives{};
  for (size_t i = 0; i < preds.size(); ++i) {
    CheckGroupIndex(groups[i]);
    members[groups[i]] += 1;
    positives[groups[i]] += preds[i] == 1;
  }
  if (members[0] == 0 || members[1] == 0) {
    throw std::invalid_argument("demographic parity needs both groups");
  }
  if (positives[1] == 0) return std::nullopt;
  const double rate0 = static_cast<double>(positives[0]) / members[0];
  const double rate1 = static_cast<double>(positives[1]) / members[1];
  return rate0 / rate1;
}

std::optional<double> EqualizedOdds(std::span<const int> preds,
                                    std::span<const int> labels,
                                    std::span<const int> groups,
                                    std::string* empty_cell) {
  if (preds.size() != labels.size() || preds.size() != groups.size()) {
    throw std::invalid_argument("inputs differ in length");
  }
  std::array<std::array<int, 2>, 2> members{};
  std::array<std::array<int, 2>, 2> positives{};
  for (size_t i = 0; i < preds.size(); ++i) {
    CheckGroupIndex(groups[i]);
    const int y = labels[i];
    CheckLabel(y);
    members[groups[i]][y] += 1;
    positives[groups[i]][y] += preds[i] == 1;
  }
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      if (members[a][y] == 0) {
        if (empty_cell) {
          *empty_cell = "a=" + std::to_string(a) + ",y=" + std::to_string(y);
        }
        return std::nullopt;
      }
    }
  }
  auto rate = [&](int a, int y) {
    return static_cast<double>(positives[a][y]) / members[a][y];
  };
  return (rate(0, 1) - rate(1, 1)) + (rate(0, 0) - rate(1, 0));
}

double Accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("preds and labels differ in length");
  }
  if (preds.empty()) throw std::invalid_argument("accuracy of empty input");
  int correct = 0;
  for (size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

ConfidenceGap ConfidenceGaps(std::span<const double> desired_probs,
                             std::span<const int> labels,
                             std::span<const int> groups) {
  if (desired_probs.size() != labels.size() ||
      desired_probs.size() != groups.size()) {
    throw std::invalid_argument("inputs differ in length");
  }
  ConfidenceGap out;
  std::array<std::array<double, 2>, 2> sums{};
  std::array<std::array<double, 2>, 2> sums_undesired{};
  for (size_t i = 0; i < desired_probs.size(); ++i) {
    const double p = desired_probs[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("probabilities must lie in [0, 1]");
    }
    CheckGroupIndex(groups[i]);
    CheckLabel(labels[i]);
    sums[groups[i]][labels[i]] += p;
    sums_undesired[groups[i]][labels[i]] += 1.0 - p;
    out.counts[groups[i]][labels[i]] += 1;
  }
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      if (out.counts[a][y] > 0) {
        out.mean_desired[a][y] = sums[a][y] / out.counts[a][y];
      }
    }
  }
  if (out.mean_desired[0][1] && out.mean_desired[1][1]) {
    out.gap_desired = *out.mean_desired[1][1] - *out.mean_desired[0][1];
  }
  if (out.counts[0][0] > 0 && out.counts[1][0] > 0) {
    out.gap_undesired = sums_undesired[0][0] / out.counts[0][0] -
                        sums_undesired[1][0] / out.counts[1][0];
  }
  return out;
}

int HardPrediction(const Vector& probs) {
  int best = 0;
  for (int c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

MetricsRecord ComputeMetrics(const Matrix& probabilities,
                             std::span<const int> labels,
                             std::span<const int> groups) {
  if (probabilities.rows() != static_cast<Eigen::Index>(labels.size()) ||
      probabilities.cols() != 2) {
    throw ShapeError("metrics expect an n x 2 probability matrix");
  }
  std::vector<int> preds(labels.size());
  std::vector<double> desired(labels.size());
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    preds[i] = HardPrediction(probabilities.row(i).transpose());
    desired[i] = std::min(1.0, std::max(0.0, probabilities(i, 1)));
  }
  MetricsRecord r;
  r.accuracy = Accuracy(preds, labels);
  r.dp = DemographicParity(preds, groups);
  r.delta_eo = EqualizedOdds(preds, labels, groups);
  r.confidence = ConfidenceGaps(desired, labels, groups);
  if (!r.dp) AddFlag(&r.undefined_flags, "dp");
  if (!r.delta_eo) AddFlag(&r.undefined_flags, "delta_eo");
  if (!r.confidence.gap_desired) AddFlag(&r.undefined_flags, "gap1");
  if (!r.confidence.gap_undesired) AddFlag(&r.undefined_flags, "gap2");
  return r;
}

}  // namespace rnf::metrics

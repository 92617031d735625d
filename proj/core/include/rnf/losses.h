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

// Training objectives and their gradients.
//
// Per-sample losses return the gradient w.r.t. the logits that produced the
// probabilities (CE, GCE) or w.r.t. the output vector itself (MSE). The head
// losses (neutralization MSE, smoothing, combined) evaluate the classification
// head of a model and return gradients for its trainable layers, averaged over
// the batch rows.

#ifndef RNF_LOSSES_H_
#define RNF_LOSSES_H_

#include <span>
#include <vector>

#include "rnf/common.h"
#include "rnf/nn.h"

namespace rnf::losses {

// Floor applied to probabilities before logs and powers.
inline constexpr double kProbabilityFloor = 1e-12;

struct SoftTarget {
  Vector probabilities;
  double temperature = 1.0;

  static SoftTarget FromLogits(const Vector& logits, double temperature);
};

struct GceConfig {
  double q = 0.2;
  void Validate() const;
};

struct RnfLossConfig {
  double alpha = 1.0;
  std::vector<double> lambda_set = {0.6, 0.7, 0.8, 0.9};
  double temperature = 1.0;
  void Validate() const;
};

// softmax(logits / T). Throws ConfigError when T < 1.
Vector SoftmaxTemperature(const Vector& logits, double temperature);
Matrix SoftmaxTemperature(const Matrix& logits, double temperature);

// Maps dLoss/d(probabilities) to dLoss/d(logits) for p = softmax(logits / T),
// row by row.
Matrix SoftmaxBackward(const Matrix& probabilities, const Matrix& d_probs,
                       double temperature);

struct LossGrad {
  double loss = 0.0;
  Vector grad;
  // Set when probs[y] fell below kProbabilityFloor and was clamped.
  bool clamped = false;
};

// -log p_y with logit gradient p - onehot(y).
LossGrad CrossEntropy(const Vector& probs, int label);

// (1 - p_y^q) / q with logit gradient p_y^q (p - onehot(y)).
LossGrad GeneralizedCrossEntropy(const Vector& probs, int label,
                                 const GceConfig& config);

// Squared L2 distance between two probability vectors; grad is w.r.t.
// `output`.
LossGrad RnfMse(const Vector& output, const Vector& target);

// Batch means of CE / GCE with per-row logit gradients already divided by
// the batch size.
struct BatchLoss {
  double loss = 0.0;
  Matrix d_logits;
  int clamped = 0;
};
BatchLoss CrossEntropyBatch(const Matrix& probs, std::span<const int> labels);
BatchLoss GceBatch(const Matrix& probs, std::span<const int> labels,
                   const GceConfig& config);

// How the classification head is evaluated inside the head losses.
struct HeadOptions {
  double temperature = 1.0;
  // First layer receiving gradients; -1 selects the encoder depth.
  int first_trainable = -1;
  nn::Mode mode = nn::Mode::kEval;
  // Dropout seed. Every head evaluation of one loss call shares it, so equal
  // inputs see equal masks.
  uint64_t seed = 0;
};

struct HeadLoss {
  double loss = 0.0;
  nn::Gradients gradients;
};

// Batch mean of ||c((z1+z2)/2) - (p1+p2)/2||^2.
HeadLoss NeutralizedMseLoss(const nn::Model& model, const Matrix& z1,
                            const Matrix& z2, const Matrix& p1,
                            const Matrix& p2, const HeadOptions& options = {});

// Batch mean of sum over lambda of |c(lambda z1 + (1-lambda) z2) -
// c((z1+z2)/2)|_1. Throws ConfigError on an empty lambda set.
HeadLoss SmoothLoss(const nn::Model& model, const Matrix& z1, const Matrix& z2,
                    std::span<const double> lambda_set,
                    const HeadOptions& options = {});

struct CombinedLoss {
  double total = 0.0;
  double mse = 0.0;
  double smooth = 0.0;
  nn::Gradients gradients;
};

// mse + alpha * smooth, with head temperature taken from `config`.
CombinedLoss CombinedRnfLoss(const nn::Model& model, const Matrix& z1,
                             const Matrix& z2, const Matrix& p1,
                             const Matrix& p2, const RnfLossConfig& config,
                             HeadOptions options = {});

// Smoothing term for K >= 2 groups: |c(sum l_k z_k / sum l_k) - c(mean z)|_1.
// Throws ConfigError when K < 2, a weight lies outside [0, 1] or all weights
// are zero.
double MultiGroupSmooth(const nn::Model& model, std::span<const Vector> zs,
                        std::span<const double> lambdas,
                        double temperature = 1.0);

}  // namespace rnf::losses

#endif  // RNF_LOSSES_H_

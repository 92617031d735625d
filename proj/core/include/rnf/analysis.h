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

// Representation probing.
//
// Kernel PCA projections of encoder outputs, linear probes for the sensitive
// attribute and for the head's decision boundary, the cosine diagnostic
// between them, and a numerical check of the group loss-gap bound for
// neutralized heads.

#ifndef RNF_ANALYSIS_H_
#define RNF_ANALYSIS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnf/common.h"
#include "rnf/data.h"
#include "rnf/nn.h"

namespace rnf::analysis {

class DegenerateProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// K_ij = tanh(gain * <z_i, z_j> + offset). gain <= 0 means 1 / dim(z).
struct KernelConfig {
  double gain = 0.0;
  double offset = 1.0;
};

Matrix SigmoidKernel(const Matrix& z, const KernelConfig& config = {});

// H K H with H = I - 11^T / n.
Matrix CenterKernel(const Matrix& kernel);

struct KpcaResult {
  Matrix coordinates;     // n x dims
  Vector eigenvalues;     // descending
  Matrix eigenvectors;    // n x dims, unit norm
  Matrix centered_kernel;
  // max_k ||K_c v_k - lambda_k v_k|| / ||v_k||
  double max_residual = 0.0;
};

// Throws ConfigError when n < dims + 1 and DegenerateProjectionError when
// fewer than `dims` eigenvalues are positive.
KpcaResult KpcaProject(const Matrix& z, int dims = 2,
                       const KernelConfig& config = {});

// First `count` indices of a seeded shuffle of [0, n).
std::vector<int> SelectSamples(int n, int count, uint64_t seed);

// index,coord1,coord2,a,y,yhat
void WriteKpcaCsv(const KpcaResult& result, std::span<const int> indices,
                  std::span<const int> groups, std::span<const int> labels,
                  std::span<const int> predictions,
                  const std::filesystem::path& path);

// logits = W z + b, one weight row per class.
struct LinearProbe {
  Matrix weight;  // classes x dim
  Vector bias;

  Matrix Logits(const Matrix& z) const;
  std::vector<int> Predict(const Matrix& z) const;
  void Validate() const;
};

struct ProbeConfig {
  int epochs = 200;
  double learning_rate = 1e-2;
  uint64_t seed = 0;
  int num_classes = 2;
};

struct ProbeLoss {
  double loss = 0.0;
  Matrix d_weight;
  Vector d_bias;
};

// Mean cross entropy of the probe and its parameter gradient.
ProbeLoss ProbeLossAndGradient(const LinearProbe& probe, const Matrix& z,
                               std::span<const int> targets);

// Full-batch Adam on cross entropy from a seeded small-normal start. Throws
// DivergenceError (with the epoch) on non-finite loss.
LinearProbe FitLinearProbe(const Matrix& z, std::span<const int> targets,
                           const ProbeConfig& config = {});

double ProbeAccuracy(const LinearProbe& probe, const Matrix& z,
                     std::span<const int> targets);

// Hard predictions of the model's head on representations.
std::vector<int> HeadPredictions(const nn::Model& model, const Matrix& z);

// Cosine of sens.weight.row(group_index) and mimic.weight.row(class_index).
// nullopt when either row has zero norm.
std::optional<double> HeadAttentionSimilarity(const LinearProbe& sens,
                                              const LinearProbe& mimic,
                                              int group_index, int class_index);

struct ProbeReport {
  double sensitive_accuracy = 0.0;
  double mimic_agreement = 0.0;
  // Privileged-group row against desired-class row.
  std::optional<double> similarity;
  LinearProbe sensitive;
  LinearProbe mimic;
};

// Encodes `split`, fits the sensitive-attribute probe on ground-truth groups
// and the mimic probe on the head's predictions.
ProbeReport ProbeModel(const nn::Model& model, const data::Dataset& split,
                       const ProbeConfig& config = {});

// Per-sample loss family: l(s, y) for a scalar head score s.
//   kCrossEntropy: s is the logit of class 1, l = softplus(s) or softplus(-s).
//   kSquared:      l = (s - y)^2.
enum class LossFamily { kCrossEntropy, kSquared };

// Scalar head score of a representation.
using ScoreFn = std::function<double(const Vector& z)>;

// L(s, p) = (1 - p) l(s, 0) + p l(s, 1)
double MixedLoss(double score, double p, LossFamily family);

struct PairSet {
  Matrix z1;  // group 0 representations, one per row
  Matrix z2;  // group 1 partners
  Vector p1;  // soft desired-class probability of each z1
  Vector p2;
};

struct TheoremInstance {
  double epsilon_p = 0.0;
  double epsilon_c = 0.0;
  double epsilon_L = 0.0;
  double lambda_z = 0.0;
  double gap = 0.0;    // |mean L(z1, p1) - mean L(z2, p2)|
  double bound = 0.0;  // epsilon_p (lambda_z epsilon_c + epsilon_L)
  int num_pairs = 0;
  // Set when a pair breaks ||z1 - z2|| <= lambda_z |p1 - p2|; no verdict then.
  std::optional<std::string> hypothesis_violation;
  bool pass = false;
};

constexpr double kBoundSlack = 1e-9;
constexpr double kGradientStep = 1e-5;

TheoremInstance VerifyTheoremBound(const ScoreFn& head, const PairSet& pairs,
                                   LossFamily family);

// Head score is logit_1 - logit_0 of the model's head; pairs are encoded
// with its encoder.
TheoremInstance VerifyTheoremBound(const nn::Model& model, const Matrix& x1,
                                   const Matrix& x2, const Vector& p1,
                                   const Vector& p2,
                                   LossFamily family = LossFamily::kCrossEntropy);

}  // namespace rnf::analysis

#endif  // RNF_ANALYSIS_H_

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

#include <cmath>
#include <string>

namespace rnf::losses {
namespace {

void CheckTemperature(double temperature) {
  if (!(temperature >= 1.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be >= 1, got " +
                      std::to_string(temperature));
  }
}

void CheckLabel(const Vector& probs, int label) {
  if (label < 0 || label >= probs.size()) {
    throw ShapeError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(probs.size()) + " classes");
  }
}

int ResolveFirstTrainable(const nn::Model& model, const HeadOptions& options) {
  const int first = options.first_trainable < 0 ? model.encoder_depth()
                                                : options.first_trainable;
  if (first < model.encoder_depth() || first >= model.num_layers()) {
    throw ConfigError("head losses only train layers inside the head");
  }
  return first;
}

// Head evaluated at temperature T, with the trace needed for backprop.
struct HeadPass {
  nn::ForwardTrace trace;
  Matrix probs;
};

HeadPass RunHead(const nn::Model& model, const Matrix& z,
                 const HeadOptions& options) {
  HeadPass pass;
  pass.trace = nn::ForwardRange(model, z, model.encoder_depth(),
                                model.num_layers(), options.mode, options.seed);
  pass.probs = SoftmaxTemperature(pass.trace.output, options.temperature);
  return pass;
}

void Accumulate(const nn::Model& model, const HeadPass& pass,
                const Matrix& d_probs, const HeadOptions& options,
                int first_trainable, nn::Gradients* out) {
  const Matrix d_logits =
      SoftmaxBackward(pass.probs, d_probs, options.temperature);
  out->Add(nn::BackwardFrom(model, pass.trace, d_logits, first_trainable)
               .gradients);
}

void CheckPairShapes(const nn::Model& model, const Matrix& z1,
                     const Matrix& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) {
    throw ShapeError("z1 and z2 must have identical shapes");
  }
  if (z1.cols() != model.representation_dim()) {
    throw ShapeError("representation width " + std::to_string(z1.cols()) +
                     " does not match encoder output " +
                     std::to_string(model.representation_dim()));
  }
  if (z1.rows() == 0) throw ShapeError("empty batch");
}

double Sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

SoftTarget SoftTarget::FromLogits(const Vector& logits, double temperature) {
  return SoftTarget{SoftmaxTemperature(logits, temperature), temperature};
}

void GceConfig::Validate() const {
  if (!(q > 0.0 && q <= 1.0)) {
    throw ConfigError("GCE q must lie in (0, 1], got " + std::to_string(q));
  }
}

void RnfLossConfig::Validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be >= 0");
  }
  if (lambda_set.empty()) throw ConfigError("lambda set must not be empty");
  for (const double l : lambda_set) {
    if (!(l >= 0.5 && l < 1.0)) {
      throw ConfigError("every lambda must lie in [0.5, 1), got " +
                        std::to_string(l));
    }
  }
  CheckTemperature(temperature);
}

Vector SoftmaxTemperature(const Vector& logits, double temperature) {
  return SoftmaxTemperature(Matrix(logits.transpose()), temperature)
      .row(0)
      .transpose();
}

Matrix SoftmaxTemperature(const Matrix& logits, double temperature) {
  CheckTemperature(temperature);
  if (!logits.allFinite()) throw NumericError("non-finite logits");
  return nn::Softmax(logits / temperature);
}

Matrix SoftmaxBackward(const Matrix& probabilities, const Matrix& d_probs,
                       double temperature) {
  // d logit_j = p_j (g_j - <p, g>) / T
  const Vector inner = probabilities.cwiseProduct(d_probs).rowwise().sum();
  Matrix out = d_probs;
  out.colwise() -= inner;
  return probabilities.cwiseProduct(out) / temperature;
}

LossGrad CrossEntropy(const Vector& probs, int label) {
  CheckLabel(probs, label);
  LossGrad r;
  double p = probs[label];
  if (p < kProbabilityFloor) {
    p = kProbabilityFloor;
    r.clamped = true;
  }
  r.loss = -std::log(p);
  r.grad = probs;
  r.grad[label] -= 1.0;
  return r;
}

LossGrad GeneralizedCrossEntropy(const Vector& probs, int label,
                                 const GceConfig& config) {
  config.Validate();
  CheckLabel(probs, label);
  LossGrad r;
  double p = probs[label];
  if (p < kProbabilityFloor) {
    p = kProbabilityFloor;
    r.clamped = true;
  }
  const double weight = std::pow(p, config.q);
  // expm1 keeps the small-q limit accurate.
  r.loss = -std::expm1(config.q * std::log(p)) / config.q;
  r.grad = probs;
  r.grad[label] -= 1.0;
  r.grad *= weight;
  return r;
}

LossGrad RnfMse(const Vector& output, const Vector& target) {
  if (output.size() != target.size()) {
    throw ShapeError("output and target lengths differ");
  }
  LossGrad r;
  const Vector diff = output - target;
  r.loss = diff.squaredNorm();
  r.grad = 2.0 * diff;
  return r;
}

BatchLoss CrossEntropyBatch(const Matrix& probs, std::span<const int> labels) {
  if (static_cast<size_t>(probs.rows()) != labels.size()) {
    throw ShapeError("labels and probabilities differ in length");
  }
  BatchLoss out;
  out.d_logits.resize(probs.rows(), probs.cols());
  const double n = static_cast<double>(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const LossGrad g = CrossEntropy(probs.row(i).transpose(), labels[i]);
    out.loss += g.loss;
    out.clamped += g.clamped ? 1 : 0;
    out.d_logits.row(i) = g.grad.transpose() / n;
  }
  out.loss /= n;
  return out;
}

BatchLoss GceBatch(const Matrix& probs, std::span<const int> labels,
                   const GceConfig& config) {
  if (static_cast<size_t>(probs.rows()) != labels.size()) {
    throw ShapeError("labels and probabilities differ in length");
  }
  BatchLoss out;
  out.d_logits.resize(probs.rows(), probs.cols());
  const double n = static_cast<double>(probs.rows());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const LossGrad g =
        GeneralizedCrossEntropy(probs.row(i).transpose(), labels[i], config);
    out.loss += g.loss;
    out.clamped += g.clamped ? 1 : 0;
    out.d_logits.row(i) = g.grad.transpose() / n;
  }
  out.loss /= n;
  return out;
}

HeadLoss NeutralizedMseLoss(const nn::Model& model, const Matrix& z1,
                            const Matrix& z2, const Matrix& p1,
                            const Matrix& p2, const HeadOptions& options) {
  CheckPairShapes(model, z1, z2);
  if (p1.rows() != z1.rows() || p2.rows() != z1.rows() ||
      p1.cols() != model.output_dim() || p2.cols() != model.output_dim()) {
    throw ShapeError("soft targets do not match the batch or class count");
  }
  const int first = ResolveFirstTrainable(model, options);
  const double n = static_cast<double>(z1.rows());

  const HeadPass mid = RunHead(model, 0.5 * (z1 + z2), options);
  const Matrix diff = mid.probs - 0.5 * (p1 + p2);

  HeadLoss out;
  out.loss = diff.squaredNorm() / n;
  out.gradients = nn::Gradients::ZerosLike(model, first);
  Accumulate(model, mid, 2.0 * diff / n, options, first, &out.gradients);
  return out;
}

HeadLoss SmoothLoss(const nn::Model& model, const Matrix& z1, const Matrix& z2,
                    std::span<const double> lambda_set,
                    const HeadOptions& options) {
  if (lambda_set.empty()) throw ConfigError("lambda set must not be empty");
  CheckPairShapes(model, z1, z2);
  const int first = ResolveFirstTrainable(model, options);
  const double n = static_cast<double>(z1.rows());

  const HeadPass mid = RunHead(model, 0.5 * (z1 + z2), options);
  Matrix d_mid = Matrix::Zero(mid.probs.rows(), mid.probs.cols());

  HeadLoss out;
  out.gradients = nn::Gradients::ZerosLike(model, first);
  for (const double lambda : lambda_set) {
    const HeadPass interp =
        RunHead(model, lambda * z1 + (1.0 - lambda) * z2, options);
    const Matrix diff = interp.probs - mid.probs;
    out.loss += diff.cwiseAbs().sum() / n;
    const Matrix sign = diff.unaryExpr(&Sign) / n;
    Accumulate(model, interp, sign, options, first, &out.gradients);
    d_mid -= sign;
  }
  Accumulate(model, mid, d_mid, options, first, &out.gradients);
  return out;
}

CombinedLoss CombinedRnfLoss(const nn::Model& model, const Matrix& z1,
                             const Matrix& z2, const Matrix& p1,
                             const Matrix& p2, const RnfLossConfig& config,
                             HeadOptions options) {
  config.Validate();
  options.temperature = config.temperature;
  HeadLoss mse = NeutralizedMseLoss(model, z1, z2, p1, p2, options);
  CombinedLoss out;
  out.mse = mse.loss;
  out.gradients = std::move(mse.gradients);
  if (config.alpha > 0.0) {
    const HeadLoss smooth =
        SmoothLoss(model, z1, z2, config.lambda_set, options);
    out.smooth = smooth.loss;
    out.gradients.Add(smooth.gradients, config.alpha);
  }
  out.total = out.mse + config.alpha * out.smooth;
  return out;
}

double MultiGroupSmooth(const nn::Model& model, std::span<const Vector> zs,
                        std::span<const double> lambdas, double temperature) {
  if (zs.size() < 2) throw ConfigError("need at least two groups");
  if (lambdas.size() != zs.size()) {
    throw ConfigError("one lambda per group is required");
  }
  double weight_sum = 0.0;
  for (const double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) {
      throw ConfigError("group weights must lie in [0, 1]");
    }
    weight_sum += l;
  }
  if (weight_sum == 0.0) throw ConfigError("group weights are all zero");

  const Eigen::Index dim = zs[0].size();
  Vector weighted = Vector::Zero(dim);
  Vector uniform = Vector::Zero(dim);
  for (size_t k = 0; k < zs.size(); ++k) {
    if (zs[k].size() != dim) throw ShapeError("group vectors differ in length");
    weighted += lambdas[k] * zs[k];
    uniform += zs[k];
  }
  weighted /= weight_sum;
  uniform /= static_cast<double>(zs.size());

  Matrix points(2, dim);
  points.row(0) = weighted.transpose();
  points.row(1) = uniform.transpose();
  const Matrix probs =
      SoftmaxTemperature(nn::HeadLogits(model, points), temperature);
  return (probs.row(0) - probs.row(1)).cwiseAbs().sum();
}

}  // namespace rnf::losses

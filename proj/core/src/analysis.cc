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

#include "rnf/analysis.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rnf/metrics.h"

namespace rnf::analysis {
namespace {

double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double Loss(double score, int y, LossFamily family) {
  if (family == LossFamily::kSquared) return (score - y) * (score - y);
  return y == 1 ? Softplus(-score) : Softplus(score);
}

}  // namespace

Matrix SigmoidKernel(const Matrix& z, const KernelConfig& config) {
  const double gain = config.gain > 0.0 ? config.gain : 1.0 / z.cols();
  Matrix k = z * z.transpose();
  return (gain * k.array() + config.offset).tanh().matrix();
}

Matrix CenterKernel(const Matrix& kernel) {
  const Vector row_mean = kernel.rowwise().mean();
  const Vector col_mean = kernel.colwise().mean().transpose();
  const double all_mean = kernel.mean();
  Matrix out = kernel;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += all_mean;
  return out;
}

KpcaResult KpcaProject(const Matrix& z, int dims, const KernelConfig& config) {
  const auto n = z.rows();
  if (dims < 1) throw ConfigError("kpca needs dims >= 1");
  if (n < dims + 1) {
    throw ConfigError("kpca needs at least dims + 1 points, got " +
                      std::to_string(n));
  }
  if (!z.allFinite()) throw NumericError("kpca input is not finite");
  KpcaResult out;
  out.centered_kernel = CenterKernel(SigmoidKernel(z, config));
  // Exact symmetry keeps the solver on its self-adjoint path.
  const Matrix sym =
      0.5 * (out.centered_kernel + out.centered_kernel.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw NumericError("kpca eigensolve failed");
  }
  const Vector& values = solver.eigenvalues();  // ascending
  const double scale = std::max(1.0, std::abs(values[n - 1]));
  out.eigenvalues.resize(dims);
  out.eigenvectors.resize(n, dims);
  out.coordinates.resize(n, dims);
  for (int k = 0; k < dims; ++k) {
    const double lambda = values[n - 1 - k];
    if (!(lambda > 1e-10 * scale)) {
      throw DegenerateProjectionError(
          "kernel has fewer than " + std::to_string(dims) +
          " positive eigenvalues");
    }
    Vector v = solver.eigenvectors().col(n - 1 - k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0) v = -v;
        break;
      }
    }
    out.eigenvalues[k] = lambda;
    out.eigenvectors.col(k) = v;
    // K_c (v / sqrt(lambda)) = sqrt(lambda) v
    out.coordinates.col(k) = out.centered_kernel * v / std::sqrt(lambda);
    const double residual =
        (out.centered_kernel * v - lambda * v).norm() / v.norm();
    out.max_residual = std::max(out.max_residual, residual);
  }
  return out;
}

std::vector<int> SelectSamples(int n, int count, uint64_t seed) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, "kpca-select"));
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.Below(static_cast<uint64_t>(i) + 1)]);
  }
  order.resize(std::min(n, std::max(0, count)));
  return order;
}

void WriteKpcaCsv(const KpcaResult& result, std::span<const int> indices,
                  std::span<const int> groups, std::span<const int> labels,
                  std::span<const int> predictions,
                  const std::filesystem::path& path) {
  const auto n = static_cast<size_t>(result.coordinates.rows());
  if (indices.size() != n || groups.size() != n || labels.size() != n ||
      predictions.size() != n || result.coordinates.cols() < 2) {
    throw ShapeError("kpca csv inputs differ in length");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "index,coord1,coord2,a,y,yhat\n";
  for (size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << indices[i] << ',' << result.coordinates(r, 0) << ','
        << result.coordinates(r, 1) << ',' << groups[i] << ',' << labels[i]
        << ',' << predictions[i] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Matrix LinearProbe::Logits(const Matrix& z) const {
  Matrix out = z * weight.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

std::vector<int> LinearProbe::Predict(const Matrix& z) const {
  const Matrix logits = Logits(z);
  std::vector<int> out(static_cast<size_t>(z.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[i] = metrics::HardPrediction(logits.row(i).transpose());
  }
  return out;
}

void LinearProbe::Validate() const {
  if (bias.size() != weight.rows()) throw ShapeError("probe bias size mismatch");
  if (!weight.allFinite() || !bias.allFinite()) {
    throw NumericError("probe parameters are not finite");
  }
}

ProbeLoss ProbeLossAndGradient(const LinearProbe& probe, const Matrix& z,
                               std::span<const int> targets) {
  if (z.rows() != static_cast<Eigen::Index>(targets.size()) || z.rows() == 0) {
    throw ShapeError("probe inputs differ in length");
  }
  if (z.cols() != probe.weight.cols()) {
    throw ShapeError("probe width does not match representations");
  }
  const Matrix probs = nn::Softmax(probe.Logits(z));
  Matrix d_logits = probs;
  ProbeLoss out;
  const double n = static_cast<double>(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int t = targets[i];
    if (t < 0 || t >= probe.weight.rows()) {
      throw ShapeError("probe target out of range");
    }
    out.loss -= std::log(std::max(probs(i, t), 1e-12));
    d_logits(i, t) -= 1.0;
  }
  out.loss /= n;
  d_logits /= n;
  out.d_weight = d_logits.transpose() * z;
  out.d_bias = d_logits.colwise().sum().transpose();
  return out;
}

LinearProbe FitLinearProbe(const Matrix& z, std::span<const int> targets,
                           const ProbeConfig& config) {
  if (config.epochs < 1 || !(config.learning_rate > 0.0) ||
      config.num_classes < 2) {
    throw ConfigError("invalid probe configuration");
  }
  LinearProbe probe;
  Rng rng(DeriveSeed(config.seed, "probe-init"));
  probe.weight.resize(config.num_classes, z.cols());
  for (Eigen::Index i = 0; i < probe.weight.size(); ++i) {
    probe.weight.data()[i] = 0.01 * rng.Normal();
  }
  probe.bias = Vector::Zero(config.num_classes);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Matrix mw = Matrix::Zero(probe.weight.rows(), probe.weight.cols());
  Matrix vw = mw;
  Vector mb = Vector::Zero(probe.bias.size());
  Vector vb = mb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const ProbeLoss g = ProbeLossAndGradient(probe, z, targets);
    if (!std::isfinite(g.loss) || !g.d_weight.allFinite()) {
      throw DivergenceError(
          "probe diverged at epoch " + std::to_string(epoch), epoch);
    }
    const double t = epoch + 1;
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    mw = kBeta1 * mw + (1 - kBeta1) * g.d_weight;
    vw = kBeta2 * vw + (1 - kBeta2) * g.d_weight.cwiseAbs2();
    mb = kBeta1 * mb + (1 - kBeta1) * g.d_bias;
    vb = kBeta2 * vb + (1 - kBeta2) * g.d_bias.cwiseAbs2();
    probe.weight.array() -= config.learning_rate * (mw.array() / c1) /
                            ((vw.array() / c2).sqrt() + kEps);
    probe.bias.array() -= config.learning_rate * (mb.array() / c1) /
                          ((vb.array() / c2).sqrt() + kEps);
  }
  probe.Validate();
  return probe;
}

double ProbeAccuracy(const LinearProbe& probe, const Matrix& z,
                     std::span<const int> targets) {
  return metrics::Accuracy(probe.Predict(z), targets);
}

std::vector<int> HeadPredictions(const nn::Model& model, const Matrix& z) {
  const Matrix logits = nn::HeadLogits(model, z);
  std::vector<int> out(static_cast<size_t>(z.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[i] = metrics::HardPrediction(logits.row(i).transpose());
  }
  return out;
}

std::optional<double> HeadAttentionSimilarity(const LinearProbe& sens,
                                              const LinearProbe& mimic,
                                              int group_index,
                                              int class_index) {
  if (sens.weight.cols() != mimic.weight.cols()) {
    throw ShapeError("probes differ in representation width");
  }
  if (group_index < 0 || group_index >= sens.weight.rows() ||
      class_index < 0 || class_index >= mimic.weight.rows()) {
    throw ShapeError("probe row index out of range");
  }
  const Vector a = sens.weight.row(group_index).transpose();
  const Vector b = mimic.weight.row(class_index).transpose();
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

ProbeReport ProbeModel(const nn::Model& model, const data::Dataset& split,
                       const ProbeConfig& config) {
  if (!split.has_groups()) {
    throw DataError("probing needs ground-truth sensitive attributes");
  }
  const Matrix z = nn::Encode(model, split.features);
  const std::vector<int> head = HeadPredictions(model, z);
  ProbeReport out;
  out.sensitive = FitLinearProbe(z, split.groups, config);
  out.mimic = FitLinearProbe(z, head, config);
  out.sensitive_accuracy = ProbeAccuracy(out.sensitive, z, split.groups);
  out.mimic_agreement = ProbeAccuracy(out.mimic, z, head);
  out.similarity = HeadAttentionSimilarity(out.sensitive, out.mimic, 1, 1);
  return out;
}

double MixedLoss(double score, double p, LossFamily family) {
  return (1.0 - p) * Loss(score, 0, family) + p * Loss(score, 1, family);
}

TheoremInstance VerifyTheoremBound(const ScoreFn& head, const PairSet& pairs,
                                   LossFamily family) {
  const auto n = pairs.z1.rows();
  if (n == 0 || pairs.z2.rows() != n || pairs.p1.size() != n ||
      pairs.p2.size() != n || pairs.z1.cols() != pairs.z2.cols()) {
    throw ShapeError("pair set components differ in size");
  }
  TheoremInstance out;
  out.num_pairs = static_cast<int>(n);
  double sum1 = 0.0, sum2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector z1 = pairs.z1.row(i).transpose();
    const Vector z2 = pairs.z2.row(i).transpose();
    const double p1 = pairs.p1[i], p2 = pairs.p2[i];
    if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0)) {
      throw ConfigError("soft probabilities must lie in [0, 1]");
    }
    const double dp = std::abs(p1 - p2);
    const double dz = (z1 - z2).norm();
    out.epsilon_p = std::max(out.epsilon_p, dp);
    if (dp == 0.0) {
      if (dz > 0.0 && !out.hypothesis_violation) {
        out.hypothesis_violation = "pair " + std::to_string(i) +
                                   " has p1 = p2 but z1 != z2";
      }
    } else {
      out.lambda_z = std::max(out.lambda_z, dz / dp);
    }

    const double s1 = head(z1), s2 = head(z2);
    for (const double s : {s1, s2}) {
      out.epsilon_L = std::max(
          {out.epsilon_L, Loss(s, 0, family), Loss(s, 1, family)});
    }
    sum1 += MixedLoss(s1, p1, family);
    sum2 += MixedLoss(s2, p2, family);

    // Central differences of L(c(z), p_mid) at the midpoint.
    const Vector mid = 0.5 * (z1 + z2);
    const double p_mid = 0.5 * (p1 + p2);
    Vector grad(mid.size());
    Vector probe = mid;
    for (Eigen::Index k = 0; k < mid.size(); ++k) {
      probe[k] = mid[k] + kGradientStep;
      const double up = MixedLoss(head(probe), p_mid, family);
      probe[k] = mid[k] - kGradientStep;
      const double down = MixedLoss(head(probe), p_mid, family);
      probe[k] = mid[k];
      grad[k] = (up - down) / (2.0 * kGradientStep);
    }
    out.epsilon_c = std::max(out.epsilon_c, grad.norm());
  }
  out.gap = std::abs(sum1 / n - sum2 / n);
  out.bound = out.epsilon_p * (out.lambda_z * out.epsilon_c + out.epsilon_L);
  out.pass = !out.hypothesis_violation && out.gap <= out.bound + kBoundSlack;
  return out;
}

TheoremInstance VerifyTheoremBound(const nn::Model& model, const Matrix& x1,
                                   const Matrix& x2, const Vector& p1,
                                   const Vector& p2, LossFamily family) {
  if (model.output_dim() != 2) {
    throw ShapeError("bound verifier needs a two-class head");
  }
  PairSet pairs{nn::Encode(model, x1), nn::Encode(model, x2), p1, p2};
  const ScoreFn head = [&model](const Vector& z) {
    const Vector logits = nn::HeadLogits(model, Matrix(z.transpose()))
                              .row(0)
                              .transpose();
    return logits[1] - logits[0];
  };
  return VerifyTheoremBound(head, pairs, family);
}

}  // namespace rnf::analysis

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

#include "rnf/pipeline.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace rnf::pipeline {
namespace {

Matrix GatherRows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  }
  return out;
}

std::vector<int> Gather(std::span<const int> values, std::span<const int> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const int r : rows) out.push_back(values[r]);
  return out;
}

nn::Model FreshModel(int input_dim, const ModelSpec& spec, uint64_t seed) {
  return nn::Model::Initialized(spec.LayerDims(input_dim), spec.encoder_depth,
                                spec.dropout, DeriveSeed(seed, "init"));
}

// Mean task objective on a split in eval mode.
double ObjectiveLoss(const nn::Model& model, const data::Dataset& split,
                     const std::optional<losses::GceConfig>& gce) {
  const Matrix probs = Predict(model, split);
  return gce ? losses::GceBatch(probs, split.labels, *gce).loss
             : losses::CrossEntropyBatch(probs, split.labels).loss;
}

// One optimization step on a batch; returns the batch loss.
using StepFn = std::function<double(nn::Model* model, nn::AdamState* adam,
                                    std::span<const int> batch,
                                    uint64_t dropout_seed)>;

// Epoch loop shared by stage one and the baselines: seeded batches, early
// stopping on validation objective, best-epoch model returned.
TrainResult TrainLoop(const data::Splits& splits, const StageOneConfig& config,
                      const StepFn& step) {
  const data::Dataset& train = splits.train;
  if (train.size() < 2) throw ConfigError("training split needs >= 2 samples");
  nn::Model model = FreshModel(train.dim(), config.model, config.seed);
  nn::AdamState adam = nn::AdamState::For(model, config.learning_rate);
  const uint64_t dropout_seed = DeriveSeed(config.seed, "dropout");

  TrainResult result{model, {}, 0};
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  uint64_t step_index = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch :
         data::Batches(train.size(), config.batch_size, config.seed, epoch)) {
      double loss;
      try {
        loss = step(&model, &adam, batch, MixSeed(dropout_seed ^ step_index++));
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " +
                                  std::to_string(epoch),
                              epoch);
      }
      if (!std::isfinite(loss)) {
        throw DivergenceError(
            "non-finite training loss at epoch " + std::to_string(epoch), epoch);
      }
      total += loss * static_cast<double>(batch.size());
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = total / train.size();
    entry.valid_loss = splits.valid.size() > 0
                           ? ObjectiveLoss(model, splits.valid, config.gce)
                           : entry.train_loss;
    result.log.push_back(entry);
    if (entry.valid_loss < best) {
      best = entry.valid_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

double ValidationAccuracy(const nn::Model& model, const data::Dataset& valid) {
  const Matrix probs = Predict(model, valid);
  std::vector<int> preds;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    preds.push_back(metrics::HardPrediction(probs.row(i).transpose()));
  }
  return metrics::Accuracy(preds, valid.labels);
}

bool UsesProxy(Method m) {
  return m == Method::kRnf || m == Method::kRnfCe ||
         m == Method::kRnfAdversarial || m == Method::kRnfEor;
}

bool IsRnf(Method m) {
  return UsesProxy(m) || m == Method::kRnfGt || m == Method::kRnfRandom;
}

}  // namespace

std::vector<int> ModelSpec::LayerDims(int input_dim) const {
  std::vector<int> dims = {input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(data::kNumClasses);
  return dims;
}

void StageOneConfig::Validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (gce) gce->Validate();
  if (model.hidden.empty()) throw ConfigError("model needs a hidden layer");
}

void ProxyConfig::Validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
}

void RnfStageConfig::Validate() const {
  loss.Validate();
  if (epochs <= 0) throw ConfigError("rnf epochs must be positive");
  if (!(learning_rate > 0.0)) {
    throw ConfigError("rnf learning rate must be positive");
  }
  if (batch_size < 2) throw ConfigError("rnf batch size must be at least 2");
  if (patience < 0) throw ConfigError("rnf patience must be >= 0");
}

void BaselineConfig::Validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ConfigError("beta must be >= 0, got " + std::to_string(beta));
  }
  training.Validate();
}

TrainResult TrainStageOne(const data::Splits& splits,
                          const StageOneConfig& config) {
  config.Validate();
  const data::Dataset& train = splits.train;
  return TrainLoop(
      splits, config,
      [&](nn::Model* model, nn::AdamState* adam, std::span<const int> batch,
          uint64_t dropout_seed) {
        const Matrix x = GatherRows(train.features, batch);
        const std::vector<int> y = Gather(train.labels, batch);
        const nn::ForwardTrace trace =
            nn::Forward(*model, x, nn::Mode::kTrain, dropout_seed);
        const losses::BatchLoss loss =
            config.gce ? losses::GceBatch(trace.probabilities, y, *config.gce)
                       : losses::CrossEntropyBatch(trace.probabilities, y);
        if (!std::isfinite(loss.loss)) return loss.loss;
        nn::AdamStep(model,
                     nn::Backward(*model, trace, loss.d_logits, nn::Scope::kAll),
                     adam);
        return loss.loss;
      });
}

std::vector<int> GenerateProxyAnnotations(const nn::Model& bias_model,
                                          const data::Dataset& train,
                                          const ProxyConfig& config) {
  config.Validate();
  const Matrix probs = Predict(bias_model, train);
  std::vector<int> out(train.size(), 0);
  for (int label = 0; label < data::kNumClasses; ++label) {
    std::vector<int> members;
    for (int i = 0; i < train.size(); ++i) {
      if (train.labels[i] == label) members.push_back(i);
    }
    // Confidence in the sample's own ground-truth label, most confident
    // first; index order breaks ties.
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      return probs(a, label) > probs(b, label);
    });
    const auto top = static_cast<size_t>(
        std::lround(config.gamma * static_cast<double>(members.size())));
    // Over-confident desired outcomes are privileged; over-confident
    // undesired outcomes are unprivileged.
    const int top_group = label == 1 ? 1 : 0;
    for (size_t k = 0; k < members.size(); ++k) {
      out[members[k]] = k < top ? top_group : 1 - top_group;
    }
  }
  return out;
}

std::vector<int> RandomAnnotations(int n, uint64_t seed) {
  Rng rng(DeriveSeed(seed, "random-annotations"));
  std::vector<int> out(n);
  for (int& g : out) g = rng.Bernoulli(0.5) ? 1 : 0;
  return out;
}

TrainResult TrainRnfHead(const nn::Model& teacher, const data::Splits& splits,
                         const RnfStageConfig& config) {
  config.Validate();
  teacher.Validate();
  const data::Dataset& train = splits.train;
  if (train.dim() != teacher.input_dim()) {
    throw ShapeError("teacher input width does not match the dataset");
  }

  std::vector<int> groups;
  switch (config.source) {
    case AnnotationSource::kGroundTruth:
      groups = train.annotations(data::Annotation::kGroundTruth);
      break;
    case AnnotationSource::kProxy:
      groups = train.annotations(data::Annotation::kProxy);
      break;
    case AnnotationSource::kRandom:
      groups = RandomAnnotations(train.size(), config.seed);
      break;
  }

  nn::Model student = teacher;
  if (config.fresh_head) {
    student.ReinitializeFrom(teacher.encoder_depth(),
                             DeriveSeed(config.seed, "head-init"));
  }
  const int first_trainable = config.head_scope == HeadScope::kFullHead
                                  ? teacher.encoder_depth()
                                  : teacher.num_layers() - 1;

  // The encoder is frozen and the teacher fixed, so representations and soft
  // targets are computed once.
  const Matrix z_all = nn::Encode(teacher, train.features);
  const Matrix p_all = losses::SoftmaxTemperature(
      nn::Forward(teacher, train.features, nn::Mode::kEval).output,
      config.loss.temperature);

  nn::AdamState adam = nn::AdamState::For(student, config.learning_rate);
  Rng pair_rng(DeriveSeed(config.seed, "pairs"));
  const uint64_t dropout_seed = DeriveSeed(config.seed, "dropout");
  uint64_t step_index = 0;

  TrainResult result{student, {}, 0};
  double best = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    double total = 0.0;
    int pairs_seen = 0;
    for (const auto& batch :
         data::Batches(train.size(), config.batch_size, config.seed, epoch)) {
      std::vector<int> anchors, partners;
      for (const int i : batch) {
        const auto j =
            data::SamplePair(batch, i, train.labels, groups, pair_rng);
        if (!j) {
          ++entry.skipped_anchors;
          continue;
        }
        anchors.push_back(i);
        partners.push_back(*j);
      }
      if (anchors.empty()) continue;
      losses::HeadOptions options;
      options.first_trainable = first_trainable;
      options.mode = config.dropout ? nn::Mode::kTrain : nn::Mode::kEval;
      options.seed = MixSeed(dropout_seed ^ step_index++);
      const losses::CombinedLoss loss = losses::CombinedRnfLoss(
          student, GatherRows(z_all, anchors), GatherRows(z_all, partners),
          GatherRows(p_all, anchors), GatherRows(p_all, partners), config.loss,
          options);
      if (!std::isfinite(loss.total)) {
        throw DivergenceError(
            "non-finite neutralization loss at epoch " + std::to_string(epoch),
            epoch);
      }
      try {
        nn::AdamStep(&student, loss.gradients, &adam);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " +
                                  std::to_string(epoch),
                              epoch);
      }
      total += loss.total * static_cast<double>(anchors.size());
      pairs_seen += static_cast<int>(anchors.size());
    }
    entry.train_loss = pairs_seen > 0 ? total / pairs_seen : 0.0;
    entry.valid_score = splits.valid.size() > 0
                            ? ValidationAccuracy(student, splits.valid)
                            : -entry.train_loss;
    result.log.push_back(entry);
    if (entry.valid_score > best) {
      best = entry.valid_score;
      result.model = student;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

std::optional<SoftEo> SoftEqualizedOdds(std::span<const double> desired_probs,
                                        std::span<const int> labels,
                                        std::span<const int> groups) {
  std::array<std::array<double, 2>, 2> sums{};
  std::array<std::array<int, 2>, 2> counts{};
  for (size_t i = 0; i < desired_probs.size(); ++i) {
    if (groups[i] < 0) return std::nullopt;
    sums[groups[i]][labels[i]] += desired_probs[i];
    counts[groups[i]][labels[i]] += 1;
  }
  for (const auto& row : counts) {
    for (const int c : row) {
      if (c == 0) return std::nullopt;
    }
  }
  SoftEo out;
  out.value = (sums[0][1] / counts[0][1] - sums[1][1] / counts[1][1]) +
              (sums[0][0] / counts[0][0] - sums[1][0] / counts[1][0]);
  out.grad.resize(static_cast<Eigen::Index>(desired_probs.size()));
  for (size_t i = 0; i < desired_probs.size(); ++i) {
    const int a = groups[i];
    const double inv = 1.0 / counts[a][labels[i]];
    out.grad[static_cast<Eigen::Index>(i)] = a == 0 ? inv : -inv;
  }
  return out;
}

TrainResult TrainEor(const data::Splits& splits, const BaselineConfig& config) {
  config.Validate();
  const data::Dataset& train = splits.train;
  if (!train.has_groups()) {
    throw ConfigError("EOR training needs ground-truth sensitive attributes");
  }
  StageOneConfig training = config.training;
  training.gce.reset();
  const double beta = config.beta;
  return TrainLoop(
      splits, training,
      [&](nn::Model* model, nn::AdamState* adam, std::span<const int> batch,
          uint64_t dropout_seed) {
        const Matrix x = GatherRows(train.features, batch);
        const std::vector<int> y = Gather(train.labels, batch);
        const nn::ForwardTrace trace =
            nn::Forward(*model, x, nn::Mode::kTrain, dropout_seed);
        losses::BatchLoss loss =
            losses::CrossEntropyBatch(trace.probabilities, y);
        if (beta > 0.0) {
          const std::vector<int> a = Gather(train.groups, batch);
          std::vector<double> s(batch.size());
          for (size_t i = 0; i < batch.size(); ++i) {
            s[i] = trace.probabilities(static_cast<Eigen::Index>(i), 1);
          }
          if (const auto eo = SoftEqualizedOdds(s, y, a)) {
            loss.loss += beta * std::abs(eo->value);
            const double sign = eo->value > 0 ? 1.0 : (eo->value < 0 ? -1.0 : 0.0);
            for (size_t i = 0; i < batch.size(); ++i) {
              // d s / d logit_1 = s (1 - s) = -d s / d logit_0
              const double g = beta * sign * eo->grad[static_cast<Eigen::Index>(i)] *
                               s[i] * (1.0 - s[i]);
              loss.d_logits(static_cast<Eigen::Index>(i), 1) += g;
              loss.d_logits(static_cast<Eigen::Index>(i), 0) -= g;
            }
          }
        }
        if (!std::isfinite(loss.loss)) return loss.loss;
        nn::AdamStep(model,
                     nn::Backward(*model, trace, loss.d_logits, nn::Scope::kAll),
                     adam);
        return loss.loss;
      });
}

TrainResult TrainAdversarial(const data::Splits& splits,
                             const BaselineConfig& config) {
  config.Validate();
  const data::Dataset& train = splits.train;
  if (!train.has_groups()) {
    throw ConfigError(
        "adversarial training needs ground-truth sensitive attributes");
  }
  StageOneConfig training = config.training;
  training.gce.reset();
  const double beta = config.beta;
  const int depth = training.model.encoder_depth;

  std::vector<int> adv_dims = {training.model.LayerDims(train.dim())[depth]};
  adv_dims.insert(adv_dims.end(), config.adversary_hidden.begin(),
                  config.adversary_hidden.end());
  adv_dims.push_back(data::kNumGroups);
  nn::Model adversary = nn::Model::Initialized(
      adv_dims, 1, 0.0, DeriveSeed(training.seed, "adversary-init"));
  nn::AdamState adversary_adam =
      nn::AdamState::For(adversary, training.learning_rate);

  return TrainLoop(
      splits, training,
      [&](nn::Model* model, nn::AdamState* adam, std::span<const int> batch,
          uint64_t dropout_seed) {
        const Matrix x = GatherRows(train.features, batch);
        const std::vector<int> y = Gather(train.labels, batch);
        const int layers = model->num_layers();
        const nn::ForwardTrace encoder =
            nn::ForwardRange(*model, x, 0, depth, nn::Mode::kTrain, dropout_seed);
        const nn::ForwardTrace head = nn::ForwardRange(
            *model, encoder.output, depth, layers, nn::Mode::kTrain,
            dropout_seed);
        const losses::BatchLoss task =
            losses::CrossEntropyBatch(head.probabilities, y);
        nn::BackwardResult head_back =
            nn::BackwardFrom(*model, head, task.d_logits, depth);
        Matrix dz = std::move(head_back.input_gradient);
        double loss = task.loss;

        if (beta > 0.0) {
          const std::vector<int> a = Gather(train.groups, batch);
          const Matrix& z = encoder.output;
          // Adversary step on the current (detached) representation.
          const nn::ForwardTrace adv_trace =
              nn::Forward(adversary, z, nn::Mode::kEval);
          const losses::BatchLoss adv_loss =
              losses::CrossEntropyBatch(adv_trace.probabilities, a);
          nn::AdamStep(&adversary,
                       nn::Backward(adversary, adv_trace, adv_loss.d_logits,
                                    nn::Scope::kAll),
                       &adversary_adam);
          // Main step pushes the representation against the updated adversary.
          const nn::ForwardTrace adv_now =
              nn::Forward(adversary, z, nn::Mode::kEval);
          const losses::BatchLoss adv_now_loss =
              losses::CrossEntropyBatch(adv_now.probabilities, a);
          const nn::BackwardResult adv_back = nn::BackwardFrom(
              adversary, adv_now, adv_now_loss.d_logits, adversary.num_layers());
          dz -= beta * adv_back.input_gradient;
          loss -= beta * adv_now_loss.loss;
        }

        nn::Gradients grads = std::move(head_back.gradients);
        grads.Add(nn::BackwardFrom(*model, encoder, dz, 0).gradients);
        if (!std::isfinite(loss)) return loss;
        nn::AdamStep(model, grads, adam);
        return loss;
      });
}

TrainResult TrainBaseline(const data::Splits& splits,
                          const BaselineConfig& config) {
  return config.kind == BaselineKind::kAdversarial
             ? TrainAdversarial(splits, config)
             : TrainEor(splits, config);
}

TrainResult CombineDebiasedEncoder(const nn::Model& backbone,
                                   const data::Splits& splits,
                                   const RnfStageConfig& config) {
  return TrainRnfHead(backbone, splits, config);
}

Matrix Predict(const nn::Model& model, const data::Dataset& dataset) {
  if (dataset.dim() != model.input_dim()) {
    throw ShapeError("model input width " + std::to_string(model.input_dim()) +
                     " does not match dataset width " +
                     std::to_string(dataset.dim()));
  }
  return nn::Forward(model, dataset.features, nn::Mode::kEval).probabilities;
}

metrics::MetricsRecord Evaluate(const nn::Model& model,
                                const data::Dataset& split) {
  if (!split.has_groups()) {
    throw DataError("evaluation split lacks ground-truth sensitive attributes");
  }
  if (split.size() == 0) throw DataError("evaluation split is empty");
  return metrics::ComputeMetrics(Predict(model, split), split.labels,
                                 split.groups);
}

std::string MethodName(Method method) {
  switch (method) {
    case Method::kVanilla:
      return "vanilla";
    case Method::kGce:
      return "gce";
    case Method::kRnf:
      return "rnf";
    case Method::kRnfGt:
      return "rnf_gt";
    case Method::kRnfCe:
      return "rnf_ce";
    case Method::kRnfRandom:
      return "rnf_random";
    case Method::kAdversarial:
      return "adversarial";
    case Method::kEor:
      return "eor";
    case Method::kRnfAdversarial:
      return "rnf_adversarial";
    case Method::kRnfEor:
      return "rnf_eor";
  }
  return "unknown";
}

Method ParseMethod(const std::string& name) {
  for (const Method m :
       {Method::kVanilla, Method::kGce, Method::kRnf, Method::kRnfGt,
        Method::kRnfCe, Method::kRnfRandom, Method::kAdversarial, Method::kEor,
        Method::kRnfAdversarial, Method::kRnfEor}) {
    if (MethodName(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

PipelineConfig WithSeed(PipelineConfig config, uint64_t seed) {
  config.stage_one.seed = seed;
  config.rnf.seed = seed;
  config.baseline.training.seed = seed;
  return config;
}

RunRecord RunMethod(Method method, const data::Splits& splits,
                    const PipelineConfig& config, StageOneCache* cache) {
  StageOneCache local;
  if (cache == nullptr) cache = &local;

  auto teacher = [&]() -> const nn::Model& {
    if (!cache->teacher) {
      StageOneConfig c = config.stage_one;
      c.gce.reset();
      cache->teacher = TrainStageOne(splits, c).model;
    }
    return *cache->teacher;
  };
  auto bias_model = [&]() -> const nn::Model& {
    if (!cache->bias_model) {
      StageOneConfig c = config.stage_one;
      c.gce = config.gce;
      cache->bias_model = TrainStageOne(splits, c).model;
    }
    return *cache->bias_model;
  };
  auto baseline = [&](BaselineKind kind) -> const nn::Model& {
    std::optional<nn::Model>& slot =
        kind == BaselineKind::kAdversarial ? cache->adversarial : cache->eor;
    if (!slot) {
      BaselineConfig c = config.baseline;
      c.kind = kind;
      slot = TrainBaseline(splits, c).model;
    }
    return *slot;
  };

  RunRecord record;
  record.method = method;
  record.seed = config.stage_one.seed;
  if (IsRnf(method)) {
    record.alpha = config.rnf.loss.alpha;
    record.temperature = config.rnf.loss.temperature;
    record.has_alpha = record.has_temperature = true;
  }
  if (UsesProxy(method)) {
    record.gamma = config.proxy.gamma;
    record.has_gamma = true;
  }
  if (method == Method::kGce || method == Method::kRnf ||
      method == Method::kRnfAdversarial || method == Method::kRnfEor) {
    record.q = config.gce.q;
    record.has_q = true;
  }
  if (method == Method::kAdversarial || method == Method::kEor ||
      method == Method::kRnfAdversarial || method == Method::kRnfEor) {
    record.beta = config.baseline.beta;
    record.has_beta = true;
  }

  auto with_proxy = [&](const nn::Model& source) {
    data::Splits annotated = splits;
    annotated.train.AttachProxy(
        GenerateProxyAnnotations(source, splits.train, config.proxy));
    return annotated;
  };
  auto rnf_config = [&](AnnotationSource source) {
    RnfStageConfig c = config.rnf;
    c.source = source;
    return c;
  };

  nn::Model model = [&]() -> nn::Model {
    switch (method) {
      case Method::kVanilla:
        return teacher();
      case Method::kGce:
        return bias_model();
      case Method::kRnf:
        return TrainRnfHead(teacher(), with_proxy(bias_model()),
                            rnf_config(AnnotationSource::kProxy))
            .model;
      case Method::kRnfCe:
        return TrainRnfHead(teacher(), with_proxy(teacher()),
                            rnf_config(AnnotationSource::kProxy))
            .model;
      case Method::kRnfGt:
        return TrainRnfHead(teacher(), splits,
                            rnf_config(AnnotationSource::kGroundTruth))
            .model;
      case Method::kRnfRandom:
        return TrainRnfHead(teacher(), splits,
                            rnf_config(AnnotationSource::kRandom))
            .model;
      case Method::kAdversarial: {
        BaselineConfig c = config.baseline;
        c.kind = BaselineKind::kAdversarial;
        return TrainBaseline(splits, c).model;
      }
      case Method::kEor: {
        BaselineConfig c = config.baseline;
        c.kind = BaselineKind::kEor;
        return TrainBaseline(splits, c).model;
      }
      case Method::kRnfAdversarial:
        return CombineDebiasedEncoder(baseline(BaselineKind::kAdversarial),
                                      with_proxy(bias_model()),
                                      rnf_config(AnnotationSource::kProxy))
            .model;
      case Method::kRnfEor:
        return CombineDebiasedEncoder(baseline(BaselineKind::kEor),
                                      with_proxy(bias_model()),
                                      rnf_config(AnnotationSource::kProxy))
            .model;
    }
    throw ConfigError("unhandled method");
  }();
  record.metrics = Evaluate(model, splits.test);
  return record;
}

SweepResult Sweep(const data::Splits& splits, const SweepConfig& config) {
  if (config.grid.empty()) throw ConfigError("sweep grid must not be empty");
  if (config.n_seeds < 1) throw ConfigError("sweep needs n_seeds >= 1");
  const bool sweeps_alpha = IsRnf(config.method);
  const size_t points = config.grid.size();

  std::vector<RunRecord> records(points * config.n_seeds);
  auto run_seed = [&](int seed_index) {
    const uint64_t seed = config.base_seed ^ static_cast<uint64_t>(seed_index);
    StageOneCache cache;
    for (size_t p = 0; p < points; ++p) {
      PipelineConfig pc = WithSeed(config.pipeline, seed);
      if (sweeps_alpha) {
        pc.rnf.loss.alpha = config.grid[p];
      } else {
        pc.baseline.beta = config.grid[p];
      }
      RunRecord& slot = records[p * config.n_seeds + seed_index];
      try {
        slot = RunMethod(config.method, splits, pc, &cache);
      } catch (const std::exception& e) {
        slot = RunRecord{};
        slot.method = config.method;
        slot.seed = seed;
        slot.error = e.what();
        if (sweeps_alpha) {
          slot.alpha = config.grid[p];
          slot.has_alpha = true;
        } else {
          slot.beta = config.grid[p];
          slot.has_beta = true;
        }
      }
      slot.run_id = MethodName(config.method) + "-p" + std::to_string(p) +
                    "-s" + std::to_string(seed_index);
    }
  };

  const int threads = std::max(1, std::min(config.threads, config.n_seeds));
  if (threads == 1) {
    for (int s = 0; s < config.n_seeds; ++s) run_seed(s);
  } else {
    std::vector<std::thread> workers;
    std::mutex mutex;
    int next = 0;
    for (int t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        while (true) {
          int s;
          {
            std::lock_guard<std::mutex> lock(mutex);
            if (next >= config.n_seeds) return;
            s = next++;
          }
          run_seed(s);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  SweepResult result;
  result.records = std::move(records);
  result.curve = AggregateCurve(result.records);
  return result;
}

std::vector<CurvePoint> AggregateCurve(const std::vector<RunRecord>& records) {
  struct Acc {
    CurvePoint point;
    std::vector<double> acc, dp, eo;
  };
  std::vector<Acc> groups;
  std::map<std::pair<std::string, double>, size_t> index;
  for (const RunRecord& r : records) {
    const std::string name = MethodName(r.method);
    const double param = r.has_beta && !r.has_alpha ? r.beta
                         : r.has_alpha             ? r.alpha
                                                   : 0.0;
    auto [it, inserted] = index.emplace(std::make_pair(name, param), groups.size());
    if (inserted) {
      groups.push_back({});
      groups.back().point.method = name;
      groups.back().point.param = param;
    }
    Acc& g = groups[it->second];
    if (!r.error.empty()) {
      ++g.point.failed;
      continue;
    }
    g.acc.push_back(r.metrics.accuracy);
    if (r.metrics.dp) {
      g.dp.push_back(*r.metrics.dp);
    } else {
      ++g.point.excluded_dp;
    }
    if (r.metrics.delta_eo) {
      g.eo.push_back(*r.metrics.delta_eo);
    } else {
      ++g.point.excluded_eo;
    }
  }
  auto mean_std = [](const std::vector<double>& v, double* mean, double* sd) {
    if (v.empty()) {
      *mean = std::numeric_limits<double>::quiet_NaN();
      *sd = std::numeric_limits<double>::quiet_NaN();
      return;
    }
    *mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (const double x : v) ss += (x - *mean) * (x - *mean);
    *sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  };
  std::vector<CurvePoint> out;
  for (Acc& g : groups) {
    mean_std(g.acc, &g.point.mean_acc, &g.point.std_acc);
    mean_std(g.dp, &g.point.mean_dp, &g.point.std_dp);
    mean_std(g.eo, &g.point.mean_eo, &g.point.std_eo);
    g.point.n = static_cast<int>(g.acc.size());
    out.push_back(g.point);
  }
  return out;
}

}  // namespace rnf::pipeline

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

// Two-stage debiasing pipeline.
//
// Stage one trains a teacher with cross entropy and a bias-amplified model
// with generalized cross entropy. Stage two labels every training sample with
// a proxy group from the bias-amplified model's confidence, freezes the
// teacher's encoder and retrains its head on neutralized pairs: the midpoint
// of two same-label, different-group representations, supervised by the mean
// of their temperature-softened teacher probabilities.
//
// Also hosts the adversarial and equalized-odds-regularized baselines, their
// combination with stage two, evaluation and seeded sweeps.

#ifndef RNF_PIPELINE_H_
#define RNF_PIPELINE_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rnf/common.h"
#include "rnf/data.h"
#include "rnf/losses.h"
#include "rnf/metrics.h"
#include "rnf/nn.h"

namespace rnf::pipeline {

struct ModelSpec {
  std::vector<int> hidden = {50, 50};
  int encoder_depth = 1;
  double dropout = 0.2;

  std::vector<int> LayerDims(int input_dim) const;
};

struct StageOneConfig {
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 64;
  uint64_t seed = 0;
  // Epochs without validation-loss improvement before stopping; 0 disables.
  int patience = 5;
  // Present for the bias-amplified model.
  std::optional<losses::GceConfig> gce;
  ModelSpec model;

  void Validate() const;
};

struct ProxyConfig {
  double gamma = 0.5;
  void Validate() const;
};

enum class AnnotationSource { kGroundTruth, kProxy, kRandom };
enum class HeadScope { kFullHead, kLastLayer };

struct RnfStageConfig {
  losses::RnfLossConfig loss;
  AnnotationSource source = AnnotationSource::kProxy;
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 64;
  uint64_t seed = 0;
  HeadScope head_scope = HeadScope::kFullHead;
  // Start from freshly initialized head weights instead of the teacher's.
  bool fresh_head = false;
  // Dropout inside the head during retraining.
  bool dropout = true;
  // Epochs without improvement of the validation score; 0 disables.
  int patience = 5;

  void Validate() const;
};

enum class BaselineKind { kAdversarial, kEor };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::kEor;
  double beta = 1.0;
  std::vector<int> adversary_hidden = {50};
  StageOneConfig training;

  void Validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // stage one: validation loss
  double valid_score = 0.0;  // stage two: validation accuracy
  int skipped_anchors = 0;   // stage two: anchors without a partner
};

struct TrainResult {
  nn::Model model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

// Cross entropy (or GCE when cfg.gce is set) training of a fresh model with
// early stopping on validation loss. Throws DivergenceError with the epoch
// index on a non-finite loss.
TrainResult TrainStageOne(const data::Splits& splits,
                          const StageOneConfig& config);

// Proxy group per training sample. Among y = 1 samples the top gamma
// fraction by desired-class probability becomes privileged (1); among y = 0
// samples the top gamma fraction by undesired-class probability becomes
// unprivileged (0). Label 1 is the desired outcome.
std::vector<int> GenerateProxyAnnotations(const nn::Model& bias_model,
                                          const data::Dataset& train,
                                          const ProxyConfig& config);

// Uniformly random groups, used by the random-annotation ablation.
std::vector<int> RandomAnnotations(int n, uint64_t seed);

// Retrains the head of `teacher` on neutralized pairs. The returned model
// shares the teacher's encoder bit for bit. Anchors without a partner in
// their batch are skipped and counted in the log. Throws ConfigError when
// the requested annotations are unavailable.
TrainResult TrainRnfHead(const nn::Model& teacher, const data::Splits& splits,
                         const RnfStageConfig& config);

// Alternating adversarial training: the adversary learns a from z, the main
// model minimizes task CE minus beta times the adversary's CE.
TrainResult TrainAdversarial(const data::Splits& splits,
                             const BaselineConfig& config);

// CE + beta * |soft delta-EO| computed per batch from desired-class
// probabilities. Batches missing a (group, label) cell use CE only.
TrainResult TrainEor(const data::Splits& splits, const BaselineConfig& config);

TrainResult TrainBaseline(const data::Splits& splits,
                          const BaselineConfig& config);

// Soft equalized-odds gap of one batch and its gradient w.r.t. the
// desired-class probabilities. nullopt when a cell is empty.
struct SoftEo {
  double value = 0.0;
  Vector grad;
};
std::optional<SoftEo> SoftEqualizedOdds(std::span<const double> desired_probs,
                                        std::span<const int> labels,
                                        std::span<const int> groups);

// Stage two on top of a debiased backbone (adversarial or EOR).
TrainResult CombineDebiasedEncoder(const nn::Model& backbone,
                                   const data::Splits& splits,
                                   const RnfStageConfig& config);

// Class probabilities for a dataset in eval mode.
Matrix Predict(const nn::Model& model, const data::Dataset& dataset);

// Metrics with ground-truth groups. Throws DataError when the split lacks
// them.
metrics::MetricsRecord Evaluate(const nn::Model& model,
                                const data::Dataset& split);

enum class Method {
  kVanilla,
  kGce,
  kRnf,      // proxy annotations from the bias-amplified model
  kRnfGt,    // ground-truth groups
  kRnfCe,    // proxy annotations from the CE teacher
  kRnfRandom,
  kAdversarial,
  kEor,
  kRnfAdversarial,
  kRnfEor,
};

std::string MethodName(Method method);
Method ParseMethod(const std::string& name);

// Everything one end-to-end run needs.
struct PipelineConfig {
  StageOneConfig stage_one;
  losses::GceConfig gce;
  ProxyConfig proxy;
  RnfStageConfig rnf;
  BaselineConfig baseline;
};

struct RunRecord {
  std::string run_id;
  Method method = Method::kVanilla;
  uint64_t seed = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double q = 0.0;
  double gamma = 0.0;
  double temperature = 0.0;
  // Which fields above apply to `method`.
  bool has_alpha = false, has_beta = false, has_q = false, has_gamma = false,
       has_temperature = false;
  metrics::MetricsRecord metrics;
  // Non-empty when the run aborted.
  std::string error;
};

// Models shared by several methods of one seed. Filled lazily.
struct StageOneCache {
  std::optional<nn::Model> teacher;
  std::optional<nn::Model> bias_model;
  std::optional<nn::Model> adversarial;
  std::optional<nn::Model> eor;
};

// Trains `method` with `config` (seeds already set) and evaluates it on the
// test split.
RunRecord RunMethod(Method method, const data::Splits& splits,
                    const PipelineConfig& config, StageOneCache* cache);

// Returns `config` with every training seed replaced by `seed`.
PipelineConfig WithSeed(PipelineConfig config, uint64_t seed);

struct SweepConfig {
  Method method = Method::kRnf;
  // alpha for RNF methods, beta for baselines.
  std::vector<double> grid = {0.0, 0.5, 1.0};
  int n_seeds = 3;
  uint64_t base_seed = 0;
  int threads = 1;
  PipelineConfig pipeline;
};

struct CurvePoint {
  std::string method;
  double param = 0.0;
  double mean_acc = 0.0, std_acc = 0.0;
  double mean_dp = 0.0, std_dp = 0.0;
  double mean_eo = 0.0, std_eo = 0.0;
  int n = 0;
  int excluded_dp = 0;
  int excluded_eo = 0;
  int failed = 0;
};

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<CurvePoint> curve;
};

// Run seed for seed index i is base_seed XOR i. Failed runs are recorded and
// the sweep continues.
SweepResult Sweep(const data::Splits& splits, const SweepConfig& config);

// Mean and sample standard deviation per (method, param), excluding
// undefined metrics and failed runs.
std::vector<CurvePoint> AggregateCurve(const std::vector<RunRecord>& records);

}  // namespace rnf::pipeline

#endif  // RNF_PIPELINE_H_

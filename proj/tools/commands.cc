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

#include "commands.h"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rnf/analysis.h"
#include "rnf/checkpoint.h"
#include "rnf/losses.h"
#include "rnf/pipeline.h"
#include "rnf/reports.h"

namespace rnf::tools {
namespace {

namespace fs = std::filesystem;
using config::RunConfig;

struct Context {
  const RunConfig& config;
  fs::path run_dir;
  std::ostream& out;
  std::ofstream log;
  checkpoint::Digest digest;
};

void LogEpochs(Context& ctx, const std::string& stage,
               const pipeline::TrainResult& result) {
  for (const auto& e : result.log) {
    ctx.log << "stage=" << stage << " epoch=" << e.epoch
            << " train_loss=" << reports::FormatNumber(e.train_loss)
            << " valid_loss=" << reports::FormatNumber(e.valid_loss)
            << " valid_score=" << reports::FormatNumber(e.valid_score)
            << " skipped_anchors=" << e.skipped_anchors << "\n";
  }
  ctx.log << "stage=" << stage << " best_epoch=" << result.best_epoch << "\n";
}

nn::Model RequireCheckpoint(const RunConfig& config, const std::string& key) {
  const std::string& path = config.Get(key);
  if (path.empty()) {
    throw ConfigError("config key '" + key + "' must name a checkpoint");
  }
  return checkpoint::Load(path);
}

void SaveModel(Context& ctx, const nn::Model& model, const std::string& name) {
  const fs::path path = ctx.run_dir / name;
  checkpoint::Save(model, path, ctx.digest);
  ctx.log << "checkpoint=" << path.string() << "\n";
}

// Writes metrics.csv and prints the row. Training commands pass metrics of
// the f32-rounded model, as saved.
int Report(Context& ctx, pipeline::RunRecord record) {
  record.run_id = ctx.run_dir.filename().string();
  reports::WriteText(ctx.run_dir / "metrics.csv",
                     reports::MetricsCsv(std::span(&record, 1)));
  ctx.out << reports::MetricsRow(record) << "\n";
  return record.metrics.all_defined() ? kOk : kUndefinedMetrics;
}

pipeline::RunRecord Record(pipeline::Method method, uint64_t seed,
                           const metrics::MetricsRecord& m) {
  pipeline::RunRecord r;
  r.method = method;
  r.seed = seed;
  r.metrics = m;
  return r;
}

void FillParams(pipeline::RunRecord* r, const pipeline::PipelineConfig& p) {
  using pipeline::Method;
  switch (r->method) {
    case Method::kRnf:
    case Method::kRnfCe:
    case Method::kRnfGt:
    case Method::kRnfRandom:
      r->alpha = p.rnf.loss.alpha;
      r->temperature = p.rnf.loss.temperature;
      r->has_alpha = r->has_temperature = true;
      if (r->method != Method::kRnfGt && r->method != Method::kRnfRandom) {
        r->gamma = p.proxy.gamma;
        r->has_gamma = true;
      }
      if (r->method == Method::kRnf) {
        r->q = p.gce.q;
        r->has_q = true;
      }
      break;
    case Method::kGce:
      r->q = p.gce.q;
      r->has_q = true;
      break;
    case Method::kAdversarial:
    case Method::kEor:
      r->beta = p.baseline.beta;
      r->has_beta = true;
      break;
    default:
      break;
  }
}

// Proxy file: train_index,a_hat with one row per training sample.
void WriteProxy(const fs::path& path, const data::Splits& splits,
                const std::vector<int>& proxy) {
  std::string text = "train_index,a_hat\n";
  for (size_t i = 0; i < proxy.size(); ++i) {
    text += std::to_string(splits.train_indices[i]) + "," +
            std::to_string(proxy[i]) + "\n";
  }
  reports::WriteText(path, text);
}

std::vector<int> ReadProxy(const fs::path& path, const data::Splits& splits) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config key 'proxy': cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (data::SplitCsvLine(line) !=
      std::vector<std::string>{"train_index", "a_hat"}) {
    throw ConfigError("config key 'proxy': unexpected header in " +
                      path.string());
  }
  std::vector<int> proxy;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = data::SplitCsvLine(line);
    const size_t row = proxy.size();
    if (fields.size() != 2 || row >= splits.train_indices.size() ||
        std::stoi(fields[0]) != splits.train_indices[row] ||
        (fields[1] != "0" && fields[1] != "1")) {
      throw ConfigError("config key 'proxy': " + path.string() +
                        " does not match the training split at row " +
                        std::to_string(row + 1));
    }
    proxy.push_back(fields[1] == "1" ? 1 : 0);
  }
  if (proxy.size() != splits.train_indices.size()) {
    throw ConfigError("config key 'proxy': " + path.string() + " has " +
                      std::to_string(proxy.size()) + " rows, training split " +
                      std::to_string(splits.train_indices.size()));
  }
  return proxy;
}

int TrainTeacher(Context& ctx) {
  auto p = config::ToPipelineConfig(ctx.config);
  const data::Splits splits = LoadSplits(ctx.config);
  p.stage_one.gce.reset();
  const auto result = pipeline::TrainStageOne(splits, p.stage_one);
  LogEpochs(ctx, "teacher", result);
  SaveModel(ctx, result.model, "teacher.ckpt");
  auto record = Record(pipeline::Method::kVanilla, p.stage_one.seed,
                       pipeline::Evaluate(checkpoint::RoundToFloat(result.model), splits.test));
  return Report(ctx, record);
}

int TrainBiasAmplified(Context& ctx) {
  auto p = config::ToPipelineConfig(ctx.config);
  const data::Splits splits = LoadSplits(ctx.config);
  p.stage_one.gce = p.gce;
  const auto result = pipeline::TrainStageOne(splits, p.stage_one);
  LogEpochs(ctx, "bias_amplified", result);
  SaveModel(ctx, result.model, "bias.ckpt");
  auto record = Record(pipeline::Method::kGce, p.stage_one.seed,
                       pipeline::Evaluate(checkpoint::RoundToFloat(result.model), splits.test));
  FillParams(&record, p);
  return Report(ctx, record);
}

int GenProxy(Context& ctx) {
  const auto p = config::ToPipelineConfig(ctx.config);
  const nn::Model bias = RequireCheckpoint(ctx.config, "bias_checkpoint");
  const data::Splits splits = LoadSplits(ctx.config);
  const auto proxy =
      pipeline::GenerateProxyAnnotations(bias, splits.train, p.proxy);
  WriteProxy(ctx.run_dir / "proxy.csv", splits, proxy);
  std::string summary = "proxy=" + (ctx.run_dir / "proxy.csv").string();
  if (splits.train.has_groups()) {
    int agree = 0;
    for (size_t i = 0; i < proxy.size(); ++i) {
      agree += proxy[i] == splits.train.groups[i];
    }
    summary += " agreement_with_groups=" +
               reports::FormatNumber(static_cast<double>(agree) / proxy.size());
  }
  ctx.log << summary << "\n";
  ctx.out << summary << "\n";
  return kOk;
}

int TrainRnf(Context& ctx) {
  const auto p = config::ToPipelineConfig(ctx.config);
  const nn::Model teacher = RequireCheckpoint(ctx.config, "teacher_checkpoint");
  data::Splits splits = LoadSplits(ctx.config);
  pipeline::Method method = pipeline::Method::kRnf;
  switch (p.rnf.source) {
    case pipeline::AnnotationSource::kProxy:
      if (!ctx.config.Get("proxy").empty()) {
        splits.train.AttachProxy(ReadProxy(ctx.config.Get("proxy"), splits));
      } else if (!ctx.config.Get("bias_checkpoint").empty()) {
        splits.train.AttachProxy(pipeline::GenerateProxyAnnotations(
            checkpoint::Load(ctx.config.Get("bias_checkpoint")), splits.train,
            p.proxy));
      } else {
        throw ConfigError(
            "annotation source 'rnf.source=proxy' has no annotations: set "
            "'proxy' or 'bias_checkpoint'");
      }
      break;
    case pipeline::AnnotationSource::kGroundTruth:
      if (!splits.train.has_groups()) {
        throw ConfigError(
            "annotation source 'rnf.source=ground_truth' needs a sensitive "
            "column in the training data");
      }
      method = pipeline::Method::kRnfGt;
      break;
    case pipeline::AnnotationSource::kRandom:
      method = pipeline::Method::kRnfRandom;
      break;
  }
  const auto result = pipeline::TrainRnfHead(teacher, splits, p.rnf);
  LogEpochs(ctx, "rnf", result);
  SaveModel(ctx, result.model, "student.ckpt");
  auto record = Record(method, p.rnf.seed,
                       pipeline::Evaluate(checkpoint::RoundToFloat(result.model), splits.test));
  FillParams(&record, p);
  return Report(ctx, record);
}

int TrainBaselineCmd(Context& ctx) {
  const auto p = config::ToPipelineConfig(ctx.config);
  const data::Splits splits = LoadSplits(ctx.config);
  const auto result = pipeline::TrainBaseline(splits, p.baseline);
  LogEpochs(ctx, "baseline", result);
  SaveModel(ctx, result.model, "baseline.ckpt");
  auto record = Record(p.baseline.kind == pipeline::BaselineKind::kEor
                           ? pipeline::Method::kEor
                           : pipeline::Method::kAdversarial,
                       p.baseline.training.seed,
                       pipeline::Evaluate(checkpoint::RoundToFloat(result.model), splits.test));
  FillParams(&record, p);
  return Report(ctx, record);
}

int EvaluateCmd(Context& ctx, const std::string& method_name) {
  const nn::Model model = RequireCheckpoint(ctx.config, "checkpoint");
  const data::Splits splits = LoadSplits(ctx.config);
  auto record = Record(pipeline::ParseMethod(method_name),
                       ctx.config.GetUint("seed"),
                       pipeline::Evaluate(model, splits.test));
  return Report(ctx, record);
}

int SweepCmd(Context& ctx) {
  const auto sweep = config::ToSweepConfig(ctx.config);
  const data::Splits splits = LoadSplits(ctx.config);
  const auto result = pipeline::Sweep(splits, sweep);
  reports::WriteText(ctx.run_dir / "metrics.csv",
                     reports::MetricsCsv(result.records));
  reports::WriteText(ctx.run_dir / "curve.csv", reports::CurveCsv(result.curve));
  if (ctx.config.GetBool("report.svg")) {
    reports::WriteText(ctx.run_dir / "curve.svg", reports::CurveSvg(result.curve));
  }
  int failed = 0;
  bool undefined = false;
  for (const auto& r : result.records) {
    if (!r.error.empty()) {
      ++failed;
      ctx.log << "run=" << r.run_id << " error=" << r.error << "\n";
    } else if (!r.metrics.all_defined()) {
      undefined = true;
    }
  }
  ctx.out << reports::CurveCsv(result.curve);
  if (failed == static_cast<int>(result.records.size())) return kRuntimeFailure;
  return undefined ? kUndefinedMetrics : kOk;
}

int ProbeCmd(Context& ctx) {
  const nn::Model model = RequireCheckpoint(ctx.config, "checkpoint");
  const data::Splits splits = LoadSplits(ctx.config);
  const auto probe =
      analysis::ProbeModel(model, splits.test, config::ToProbeConfig(ctx.config));

  const auto picked =
      analysis::SelectSamples(splits.test.size(), ctx.config.GetInt("kpca.samples"),
                              ctx.config.GetUint("seed"));
  const data::Dataset subset = splits.test.Subset(picked);
  const Matrix z = nn::Encode(model, subset.features);
  const auto kpca =
      analysis::KpcaProject(z, 2, config::ToKernelConfig(ctx.config));
  analysis::WriteKpcaCsv(kpca, picked, subset.groups, subset.labels,
                         analysis::HeadPredictions(model, z),
                         ctx.run_dir / "kpca.csv");

  const std::string row =
      reports::FormatNumber(probe.sensitive_accuracy) + "," +
      reports::FormatNumber(probe.mimic_agreement) + "," +
      (probe.similarity ? reports::FormatNumber(*probe.similarity) : "") + "," +
      reports::FormatNumber(kpca.max_residual);
  const std::string header =
      "sensitive_accuracy,mimic_agreement,similarity,kpca_residual";
  reports::WriteText(ctx.run_dir / "probe.csv", header + "\n" + row + "\n");
  ctx.out << header << "\n" << row << "\n";
  return probe.similarity ? kOk : kUndefinedMetrics;
}

int VerifyBoundCmd(Context& ctx) {
  const nn::Model model = RequireCheckpoint(ctx.config, "checkpoint");
  const data::Splits splits = LoadSplits(ctx.config);
  const data::Dataset& test = splits.test;
  if (!test.has_groups()) {
    throw DataError("verify-bound needs ground-truth sensitive attributes");
  }
  const std::string& family_name = ctx.config.Get("bound.family");
  analysis::LossFamily family;
  if (family_name == "cross_entropy") {
    family = analysis::LossFamily::kCrossEntropy;
  } else if (family_name == "squared") {
    family = analysis::LossFamily::kSquared;
  } else {
    throw ConfigError("config key 'bound.family': expected cross_entropy or "
                      "squared, got '" + family_name + "'");
  }
  const int wanted = ctx.config.GetInt("bound.pairs");
  if (wanted < 1) throw ConfigError("config key 'bound.pairs' must be >= 1");
  const double temperature = ctx.config.GetDouble("rnf.temperature");
  const Matrix probs = losses::SoftmaxTemperature(
      nn::Forward(model, test.features, nn::Mode::kEval).output, temperature);

  // Same-label pairs across groups, drawn with replacement.
  std::array<std::array<std::vector<int>, 2>, 2> cells;
  for (int i = 0; i < test.size(); ++i) {
    cells[test.groups[i]][test.labels[i]].push_back(i);
  }
  Rng rng(DeriveSeed(ctx.config.GetUint("seed"), "bound-pairs"));
  std::vector<int> first, second;
  for (int k = 0; k < wanted; ++k) {
    const int y = static_cast<int>(rng.Below(2));
    const auto& c0 = cells[0][y];
    const auto& c1 = cells[1][y];
    if (c0.empty() || c1.empty()) continue;
    first.push_back(c0[rng.Below(c0.size())]);
    second.push_back(c1[rng.Below(c1.size())]);
  }
  if (first.empty()) throw DataError("no same-label cross-group pairs in test");
  Vector p1(first.size()), p2(second.size());
  for (size_t k = 0; k < first.size(); ++k) {
    p1[k] = probs(first[k], 1);
    p2[k] = probs(second[k], 1);
  }
  const data::Dataset a = test.Subset(first);
  const data::Dataset b = test.Subset(second);
  const auto inst =
      analysis::VerifyTheoremBound(model, a.features, b.features, p1, p2, family);
  const std::string verdict =
      inst.hypothesis_violation ? "violation" : (inst.pass ? "pass" : "fail");
  const std::string header =
      "pairs,epsilon_p,lambda_z,epsilon_c,epsilon_L,gap,bound,verdict";
  const std::string row =
      std::to_string(inst.num_pairs) + "," +
      reports::FormatNumber(inst.epsilon_p) + "," +
      reports::FormatNumber(inst.lambda_z) + "," +
      reports::FormatNumber(inst.epsilon_c) + "," +
      reports::FormatNumber(inst.epsilon_L) + "," +
      reports::FormatNumber(inst.gap) + "," + reports::FormatNumber(inst.bound) +
      "," + verdict;
  reports::WriteText(ctx.run_dir / "bound.csv", header + "\n" + row + "\n");
  ctx.out << header << "\n" << row << "\n";
  if (inst.hypothesis_violation) {
    ctx.log << "hypothesis_violation=" << *inst.hypothesis_violation << "\n";
    return kUndefinedMetrics;
  }
  return inst.pass ? kOk : kRuntimeFailure;
}

// Raw CSV (x0..x{d-1}, y, a) plus a matching schema.
int SynthData(Context& ctx) {
  const data::SyntheticSpec spec = config::ToSyntheticSpec(ctx.config);
  const data::Dataset d = data::GenerateSynthetic(spec);
  std::ostringstream csv;
  csv.precision(17);
  for (int c = 0; c < d.dim(); ++c) csv << 'x' << c << ',';
  csv << "y,a\n";
  for (int i = 0; i < d.size(); ++i) {
    for (int c = 0; c < d.dim(); ++c) csv << d.features(i, c) << ',';
    csv << d.labels[i] << ',' << d.groups[i] << '\n';
  }
  reports::WriteText(ctx.run_dir / "synthetic.csv", csv.str());

  data::DatasetSchema schema;
  for (int c = 0; c < d.dim(); ++c) {
    schema.columns.emplace_back("x" + std::to_string(c),
                                data::ColumnKind::kContinuous);
  }
  schema.columns.emplace_back("y", data::ColumnKind::kLabel);
  schema.columns.emplace_back("a", data::ColumnKind::kSensitive);
  schema.label_column = "y";
  schema.desired_values = {"1"};
  schema.sensitive_column = "a";
  schema.privileged_values = {"1"};
  schema.sensitive_as_feature = false;
  schema.expected_dim = d.dim();
  reports::WriteText(ctx.run_dir / "synthetic.schema",
                     data::FormatSchema(schema));
  ctx.out << "data=" << (ctx.run_dir / "synthetic.csv").string()
          << " schema=" << (ctx.run_dir / "synthetic.schema").string() << "\n";
  return kOk;
}

}  // namespace

fs::path OutputRoot(const RunConfig& config) {
  if (const char* env = std::getenv("RNF_OUT_DIR"); env && *env) return env;
  return config.Get("out_dir");
}

data::Splits LoadSplits(const RunConfig& config) {
  const std::string& path = config.Get("data");
  data::Dataset dataset;
  if (path.empty()) {
    dataset = data::GenerateSynthetic(config::ToSyntheticSpec(config));
  } else {
    if (config.Get("schema").empty()) {
      throw ConfigError("config key 'schema' is required when 'data' is set");
    }
    dataset = data::IngestCsv(path, data::LoadSchema(config.Get("schema")));
  }
  return data::Split(dataset, config::ToSplitSpec(config));
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Representation neutralization for fair classification heads"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string method_name = "vanilla";

  const std::map<std::string, std::string> kCommands = {
      {"train-teacher", "Train the cross-entropy teacher"},
      {"train-bias-amplified", "Train the GCE bias-amplified model"},
      {"gen-proxy", "Write proxy group annotations for the training split"},
      {"train-rnf", "Retrain the teacher's head on neutralized pairs"},
      {"train-baseline", "Train the adversarial or EOR baseline"},
      {"evaluate", "Evaluate a checkpoint on the test split"},
      {"sweep", "Seeded sweep over alpha or beta"},
      {"probe", "Linear probes, cosine diagnostic and KPCA projection"},
      {"verify-bound", "Check the group loss-gap bound on test pairs"},
      {"synth-data", "Write a planted-bias synthetic dataset and schema"},
  };
  for (const auto& [name, help] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", overrides, "Override one key (key=value)");
    if (name == "evaluate") {
      sub->add_option("--method", method_name, "Method label for the report");
    }
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::optional<RunConfig> config;
  fs::path run_dir;
  try {
    config = config_path.empty() ? RunConfig() : RunConfig::Load(config_path);
    for (const auto& o : overrides) config->ApplyOverride(o);
    config::ValidatePaths(*config,
                          {"data", "schema", "checkpoint", "teacher_checkpoint",
                           "bias_checkpoint", "backbone_checkpoint", "proxy"});
    config::ToPipelineConfig(*config);  // validates every training key
    std::string name = config->Get("run_name");
    if (name.empty()) name = command + "-s" + config->Get("seed");
    run_dir = OutputRoot(*config) / name;
    fs::create_directories(run_dir);
  } catch (const ConfigError& e) {
    err << "config error (" << command << "): " << e.what() << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    err << "error (" << command << "): " << e.what() << "\n";
    return kRuntimeFailure;
  }

  Context ctx{*config, run_dir, out, std::ofstream(run_dir / "log.txt"),
              checkpoint::ConfigDigest(config->Format())};
  reports::WriteText(run_dir / "config.txt", config->Format());
  ctx.log << "command=" << command
          << " config_sha256=" << checkpoint::DigestHex(ctx.digest) << "\n";

  const std::map<std::string, std::function<int()>> handlers = {
      {"train-teacher", [&] { return TrainTeacher(ctx); }},
      {"train-bias-amplified", [&] { return TrainBiasAmplified(ctx); }},
      {"gen-proxy", [&] { return GenProxy(ctx); }},
      {"train-rnf", [&] { return TrainRnf(ctx); }},
      {"train-baseline", [&] { return TrainBaselineCmd(ctx); }},
      {"evaluate", [&] { return EvaluateCmd(ctx, method_name); }},
      {"sweep", [&] { return SweepCmd(ctx); }},
      {"probe", [&] { return ProbeCmd(ctx); }},
      {"verify-bound", [&] { return VerifyBoundCmd(ctx); }},
      {"synth-data", [&] { return SynthData(ctx); }},
  };
  int code;
  try {
    code = handlers.at(command)();
  } catch (const ConfigError& e) {
    err << "config error (" << command << "): " << e.what() << "\n";
    ctx.log << "config_error=" << e.what() << "\n";
    return kConfigFailure;
  } catch (const DivergenceError& e) {
    err << "numeric error (" << command << ", epoch " << e.where()
        << "): " << e.what() << "\n";
    ctx.log << "numeric_error=" << e.what() << "\n";
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    err << "error (" << command << "): " << e.what() << "\n";
    ctx.log << "error=" << e.what() << "\n";
    return kRuntimeFailure;
  }
  ctx.log << "exit=" << code << "\n";
  return code;
}

}  // namespace rnf::tools

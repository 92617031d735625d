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

#include "rnf/config.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rnf::config {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& DefaultEntries() {
  static const std::vector<std::pair<std::string, std::string>> kEntries = {
      {"seed", "0"},
      // Inputs. An empty data path selects the synthetic generator.
      {"data", ""},
      {"schema", ""},
      {"out_dir", "runs"},
      {"run_name", ""},
      {"checkpoint", ""},
      {"teacher_checkpoint", ""},
      {"bias_checkpoint", ""},
      {"backbone_checkpoint", ""},
      {"proxy", ""},
      {"split.train", "0.7"},
      {"split.valid", "0.1"},
      {"split.test", "0.2"},
      {"split.standardize", "true"},
      {"synthetic.n", "4000"},
      {"synthetic.d", "8"},
      {"synthetic.rate0", "0.25"},
      {"synthetic.rate1", "0.6"},
      {"synthetic.balance", "0.5"},
      {"synthetic.noise", "1.0"},
      {"synthetic.group_shift", "1.0"},
      {"synthetic.label_shift", "1.0"},
      {"model.hidden", "50,50"},
      {"model.encoder_depth", "1"},
      {"model.dropout", "0.2"},
      {"train.epochs", "20"},
      {"train.lr", "0.001"},
      {"train.batch_size", "64"},
      {"train.patience", "5"},
      {"gce.q", "0.2"},
      {"proxy.gamma", "0.5"},
      {"rnf.alpha", "1.0"},
      {"rnf.lambdas", "0.6,0.7,0.8,0.9"},
      {"rnf.temperature", "2.0"},
      {"rnf.source", "proxy"},
      {"rnf.epochs", "20"},
      {"rnf.lr", "0.001"},
      {"rnf.batch_size", "64"},
      {"rnf.head_scope", "full"},
      {"rnf.fresh_head", "false"},
      {"rnf.dropout", "true"},
      {"rnf.patience", "5"},
      {"baseline.kind", "eor"},
      {"baseline.beta", "1.0"},
      {"baseline.adversary_hidden", "50"},
      {"sweep.method", "rnf"},
      {"sweep.grid", "0,0.5,1"},
      {"sweep.seeds", "3"},
      {"sweep.threads", "1"},
      {"probe.epochs", "200"},
      {"probe.lr", "0.01"},
      {"kpca.samples", "500"},
      {"kpca.gain", "0"},
      {"kpca.offset", "1.0"},
      {"bound.family", "cross_entropy"},
      {"bound.pairs", "256"},
      {"report.svg", "false"},
  };
  return kEntries;
}

RunConfig::RunConfig() {
  for (const auto& [key, value] : DefaultEntries()) values_[key] = value;
}

RunConfig RunConfig::Parse(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected key = value");
    }
    config.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Parse(buffer.str());
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::ApplyOverride(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

bool RunConfig::Has(const std::string& key) const {
  return values_.count(key) > 0;
}

const std::string& RunConfig::Get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::GetDouble(const std::string& key) const {
  return ParseNumber<double>(key, Get(key));
}

int RunConfig::GetInt(const std::string& key) const {
  return ParseNumber<int>(key, Get(key));
}

uint64_t RunConfig::GetUint(const std::string& key) const {
  return ParseNumber<uint64_t>(key, Get(key));
}

bool RunConfig::GetBool(const std::string& key) const {
  const std::string& v = Get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" +
                    v + "'");
}

std::vector<double> RunConfig::GetDoubleList(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : SplitList(Get(key))) {
    out.push_back(ParseNumber<double>(key, item));
  }
  return out;
}

std::vector<int> RunConfig::GetIntList(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : SplitList(Get(key))) {
    out.push_back(ParseNumber<int>(key, item));
  }
  return out;
}

std::string RunConfig::Format() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

void ValidatePaths(const RunConfig& config,
                   const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    const std::string& path = config.Get(key);
    if (!path.empty() && !std::filesystem::exists(path)) {
      throw ConfigError("config key '" + key + "': file not found: " + path);
    }
  }
}

pipeline::PipelineConfig ToPipelineConfig(const RunConfig& c) {
  pipeline::PipelineConfig p;
  pipeline::ModelSpec model;
  model.hidden = c.GetIntList("model.hidden");
  model.encoder_depth = c.GetInt("model.encoder_depth");
  model.dropout = c.GetDouble("model.dropout");

  p.stage_one.epochs = c.GetInt("train.epochs");
  p.stage_one.learning_rate = c.GetDouble("train.lr");
  p.stage_one.batch_size = c.GetInt("train.batch_size");
  p.stage_one.patience = c.GetInt("train.patience");
  p.stage_one.seed = c.GetUint("seed");
  p.stage_one.model = model;
  p.stage_one.Validate();

  p.gce.q = c.GetDouble("gce.q");
  p.gce.Validate();
  p.proxy.gamma = c.GetDouble("proxy.gamma");
  p.proxy.Validate();

  p.rnf.loss.alpha = c.GetDouble("rnf.alpha");
  p.rnf.loss.lambda_set = c.GetDoubleList("rnf.lambdas");
  p.rnf.loss.temperature = c.GetDouble("rnf.temperature");
  const std::string& source = c.Get("rnf.source");
  if (source == "proxy") {
    p.rnf.source = pipeline::AnnotationSource::kProxy;
  } else if (source == "ground_truth") {
    p.rnf.source = pipeline::AnnotationSource::kGroundTruth;
  } else if (source == "random") {
    p.rnf.source = pipeline::AnnotationSource::kRandom;
  } else {
    throw ConfigError("config key 'rnf.source': expected proxy, ground_truth "
                      "or random, got '" + source + "'");
  }
  p.rnf.epochs = c.GetInt("rnf.epochs");
  p.rnf.learning_rate = c.GetDouble("rnf.lr");
  p.rnf.batch_size = c.GetInt("rnf.batch_size");
  const std::string& scope = c.Get("rnf.head_scope");
  if (scope == "full") {
    p.rnf.head_scope = pipeline::HeadScope::kFullHead;
  } else if (scope == "last_layer") {
    p.rnf.head_scope = pipeline::HeadScope::kLastLayer;
  } else {
    throw ConfigError("config key 'rnf.head_scope': expected full or "
                      "last_layer, got '" + scope + "'");
  }
  p.rnf.fresh_head = c.GetBool("rnf.fresh_head");
  p.rnf.dropout = c.GetBool("rnf.dropout");
  p.rnf.patience = c.GetInt("rnf.patience");
  p.rnf.seed = p.stage_one.seed;
  p.rnf.Validate();

  const std::string& kind = c.Get("baseline.kind");
  if (kind == "eor") {
    p.baseline.kind = pipeline::BaselineKind::kEor;
  } else if (kind == "adversarial") {
    p.baseline.kind = pipeline::BaselineKind::kAdversarial;
  } else {
    throw ConfigError("config key 'baseline.kind': expected eor or "
                      "adversarial, got '" + kind + "'");
  }
  p.baseline.beta = c.GetDouble("baseline.beta");
  p.baseline.adversary_hidden = c.GetIntList("baseline.adversary_hidden");
  p.baseline.training = p.stage_one;
  p.baseline.Validate();
  return p;
}

data::SplitSpec ToSplitSpec(const RunConfig& c) {
  data::SplitSpec s;
  s.fractions = {c.GetDouble("split.train"), c.GetDouble("split.valid"),
                 c.GetDouble("split.test")};
  s.seed = c.GetUint("seed");
  s.standardize = c.GetBool("split.standardize");
  return s;
}

data::SyntheticSpec ToSyntheticSpec(const RunConfig& c) {
  data::SyntheticSpec s;
  s.n = c.GetInt("synthetic.n");
  s.d = c.GetInt("synthetic.d");
  s.group_rates = {c.GetDouble("synthetic.rate0"),
                   c.GetDouble("synthetic.rate1")};
  s.group_balance = c.GetDouble("synthetic.balance");
  s.noise = c.GetDouble("synthetic.noise");
  s.group_shift = c.GetDouble("synthetic.group_shift");
  s.label_shift = c.GetDouble("synthetic.label_shift");
  s.seed = c.GetUint("seed");
  s.Validate();
  return s;
}

analysis::ProbeConfig ToProbeConfig(const RunConfig& c) {
  analysis::ProbeConfig p;
  p.epochs = c.GetInt("probe.epochs");
  p.learning_rate = c.GetDouble("probe.lr");
  p.seed = c.GetUint("seed");
  return p;
}

analysis::KernelConfig ToKernelConfig(const RunConfig& c) {
  return {c.GetDouble("kpca.gain"), c.GetDouble("kpca.offset")};
}

pipeline::SweepConfig ToSweepConfig(const RunConfig& c) {
  pipeline::SweepConfig s;
  s.method = pipeline::ParseMethod(c.Get("sweep.method"));
  s.grid = c.GetDoubleList("sweep.grid");
  s.n_seeds = c.GetInt("sweep.seeds");
  s.threads = c.GetInt("sweep.threads");
  s.base_seed = c.GetUint("seed");
  s.pipeline = ToPipelineConfig(c);
  if (s.grid.empty()) throw ConfigError("config key 'sweep.grid' is empty");
  if (s.n_seeds < 1) throw ConfigError("config key 'sweep.seeds' must be >= 1");
  return s;
}

}  // namespace rnf::config

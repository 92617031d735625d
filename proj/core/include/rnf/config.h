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

// Flat key=value run configuration.
//
//   # comment
//   rnf.temperature = 2.0
//   model.hidden = 50,50
//
// Every key has a default; unknown keys are rejected with their name in the
// message. Format() emits a canonical snapshot that parses back to the same
// configuration.

#ifndef RNF_CONFIG_H_
#define RNF_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rnf/analysis.h"
#include "rnf/data.h"
#include "rnf/pipeline.h"

namespace rnf::config {

class RunConfig {
 public:
  // All keys at their defaults.
  RunConfig();

  static RunConfig Parse(const std::string& text);
  static RunConfig Load(const std::filesystem::path& path);

  // Throws ConfigError for unknown keys.
  void Set(const std::string& key, const std::string& value);
  // "key=value" as given to --set.
  void ApplyOverride(const std::string& assignment);

  bool Has(const std::string& key) const;
  const std::string& Get(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  int GetInt(const std::string& key) const;
  uint64_t GetUint(const std::string& key) const;
  bool GetBool(const std::string& key) const;
  std::vector<double> GetDoubleList(const std::string& key) const;
  std::vector<int> GetIntList(const std::string& key) const;

  // Sorted canonical key = value lines.
  std::string Format() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Keys with their default values, in documentation order.
const std::vector<std::pair<std::string, std::string>>& DefaultEntries();

// Throws ConfigError naming the key when a non-empty path key points to a
// missing file.
void ValidatePaths(const RunConfig& config, const std::vector<std::string>& keys);

pipeline::PipelineConfig ToPipelineConfig(const RunConfig& config);
data::SplitSpec ToSplitSpec(const RunConfig& config);
data::SyntheticSpec ToSyntheticSpec(const RunConfig& config);
analysis::ProbeConfig ToProbeConfig(const RunConfig& config);
analysis::KernelConfig ToKernelConfig(const RunConfig& config);
pipeline::SweepConfig ToSweepConfig(const RunConfig& config);

}  // namespace rnf::config

#endif  // RNF_CONFIG_H_

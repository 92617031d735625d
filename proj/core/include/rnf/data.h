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

// Tabular datasets: schema files, CSV featurization, splits, batching,
// neutralization partners and a planted-bias synthetic generator.
//
// Conventions: label 1 is the desired outcome; group 1 is privileged and
// group 0 unprivileged. A group index of -1 means "unknown".

#ifndef RNF_DATA_H_
#define RNF_DATA_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rnf/common.h"

namespace rnf::data {

inline constexpr int kUnknownGroup = -1;
inline constexpr int kNumClasses = 2;
inline constexpr int kNumGroups = 2;
inline constexpr char kMissingCategory[] = "<missing>";

struct Sample {
  Vector x;
  int y = 0;
  std::optional<int> a;
  std::optional<int> a_hat;
};

// Where neutralization groups come from.
enum class Annotation { kGroundTruth, kProxy };

struct Dataset {
  Matrix features;             // n x d
  std::vector<int> labels;     // n, in {0, 1}
  std::vector<int> groups;     // n, in {0, 1} or kUnknownGroup
  std::vector<int> proxy;      // n or empty; attached once by proxy generation
  std::vector<std::string> feature_names;
  // Feature columns eligible for standardization.
  std::vector<int> continuous_features;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool has_groups() const;
  bool has_proxy() const { return !proxy.empty(); }
  const std::vector<int>& annotations(Annotation source) const;
  Sample sample(int i) const;
  // Rows `indices` in order, including proxy annotations when present.
  Dataset Subset(std::span<const int> indices) const;
  void AttachProxy(std::vector<int> proxy_groups);
  void Validate() const;
};

enum class ColumnKind { kCategorical, kContinuous, kLabel, kSensitive, kIgnore };

struct DatasetSchema {
  std::vector<std::pair<std::string, ColumnKind>> columns;  // file order
  std::string label_column;
  std::vector<std::string> desired_values;  // label values mapped to y = 1
  std::string sensitive_column;             // empty when absent
  std::vector<std::string> privileged_values;  // values mapped to a = 1
  std::string missing_token = "?";
  // Also one-hot encode the sensitive column into the features.
  bool sensitive_as_feature = true;
  // Drop rows that have the missing token in any used column.
  bool drop_missing_rows = false;
  // When set, ingestion fails unless the feature dimension matches.
  std::optional<int> expected_dim;

  ColumnKind kind(const std::string& column) const;
  void Validate() const;
};

// Parses the flat `key=value` schema format:
//   column.<name>.kind=categorical|continuous|label|sensitive|ignore
//   label=<column>   desired=<v>[,<v>...]
//   sensitive=<column>   privileged=<v>[,<v>...]
//   missing=<token>  sensitive_as_feature=true|false
//   drop_missing_rows=true|false  expected_dim=<int>
// Lines starting with '#' are comments.
DatasetSchema ParseSchema(const std::string& text);
DatasetSchema LoadSchema(const std::filesystem::path& path);
std::string FormatSchema(const DatasetSchema& schema);

// Splits one CSV line, honoring double quotes.
std::vector<std::string> SplitCsvLine(const std::string& line);

struct IngestReport {
  int rows_read = 0;
  int rows_dropped = 0;
  int feature_dim = 0;
  // Category order (first appearance) per categorical column.
  std::map<std::string, std::vector<std::string>> categories;
};

// One-hot encodes categoricals (first-appearance order), keeps continuous
// columns raw, maps label/sensitive columns. Rows with a missing label are
// dropped. Standardization happens in Split(). Throws DataError on unknown
// columns, unparseable numbers, an empty result or a dimension mismatch.
Dataset IngestCsv(const std::filesystem::path& path,
                  const DatasetSchema& schema, IngestReport* report = nullptr);
Dataset IngestCsvText(const std::string& text, const DatasetSchema& schema,
                      IngestReport* report = nullptr);

struct SplitSpec {
  // Either counts (all three >= 0, summing to n) or fractions summing to 1.
  std::optional<std::array<int, 3>> counts;
  std::array<double, 3> fractions = {0.7, 0.1, 0.2};
  uint64_t seed = 0;
  bool standardize = true;
};

struct Standardizer {
  std::vector<int> columns;
  std::vector<double> mean;
  std::vector<double> scale;
  void Apply(Dataset* dataset) const;
};

struct Splits {
  Dataset train, valid, test;
  std::vector<int> train_indices, valid_indices, test_indices;
  Standardizer standardizer;
};

// Seeded shuffle partition. Continuous features are standardized with
// statistics of the training part. Throws ConfigError on inconsistent specs.
Splits Split(const Dataset& dataset, const SplitSpec& spec);

// Index batches of one epoch: seeded shuffle, last short batch kept.
std::vector<std::vector<int>> Batches(int n, int batch_size, uint64_t seed,
                                      int epoch);

// Uniformly picks a batch member with the anchor's label and a different
// group, or nullopt when none exists (or the anchor's group is unknown).
std::optional<int> SamplePair(std::span<const int> batch, int anchor,
                              std::span<const int> labels,
                              std::span<const int> groups, Rng& rng);

struct SyntheticSpec {
  int n = 4000;
  int d = 8;
  // P(y = 1 | a = g).
  std::array<double, 2> group_rates = {0.25, 0.6};
  // Fraction of samples in group 0.
  double group_balance = 0.5;
  double noise = 1.0;
  // Magnitude of the group and label mean offsets.
  double group_shift = 1.0;
  double label_shift = 1.0;
  uint64_t seed = 0;
  void Validate() const;
};

// x = (2a-1) group_shift * u + (2y-1) label_shift * v + noise * N(0, I), where
// u spans the second half of the coordinates and v the first half, both with
// unit norm. Ground-truth groups are always present.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

// Debug dump of the encoded dataset: features then y, a, a_hat.
void WriteDatasetCsv(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace rnf::data

#endif  // RNF_DATA_H_

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

#include "rnf/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace rnf::data {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> SplitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw DataError("schema key '" + key + "' expects true/false, got '" +
                  value + "'");
}

ColumnKind ParseKind(const std::string& column, const std::string& value) {
  if (value == "categorical") return ColumnKind::kCategorical;
  if (value == "continuous") return ColumnKind::kContinuous;
  if (value == "label") return ColumnKind::kLabel;
  if (value == "sensitive") return ColumnKind::kSensitive;
  if (value == "ignore") return ColumnKind::kIgnore;
  throw DataError("column '" + column + "' has unknown kind '" + value + "'");
}

const char* KindName(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kCategorical:
      return "categorical";
    case ColumnKind::kContinuous:
      return "continuous";
    case ColumnKind::kLabel:
      return "label";
    case ColumnKind::kSensitive:
      return "sensitive";
    case ColumnKind::kIgnore:
      return "ignore";
  }
  return "ignore";
}

std::string JoinList(const std::vector<std::string>& values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += values[i];
  }
  return out;
}

bool Contains(const std::vector<std::string>& values, const std::string& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

void Shuffle(std::vector<int>* v, Rng* rng) {
  for (size_t i = v->size(); i > 1; --i) {
    const size_t j = rng->Below(i);
    std::swap((*v)[i - 1], (*v)[j]);
  }
}

}  // namespace

bool Dataset::has_groups() const {
  return !groups.empty() &&
         std::all_of(groups.begin(), groups.end(),
                     [](int g) { return g != kUnknownGroup; });
}

const std::vector<int>& Dataset::annotations(Annotation source) const {
  if (source == Annotation::kProxy) {
    if (!has_proxy()) throw ConfigError("proxy annotations are not attached");
    return proxy;
  }
  if (!has_groups()) {
    throw ConfigError("ground-truth sensitive attributes are not available");
  }
  return groups;
}

Sample Dataset::sample(int i) const {
  Sample s;
  s.x = features.row(i).transpose();
  s.y = labels[i];
  if (groups[i] != kUnknownGroup) s.a = groups[i];
  if (has_proxy()) s.a_hat = proxy[i];
  return s;
}

Dataset Dataset::Subset(std::span<const int> indices) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), dim());
  out.feature_names = feature_names;
  out.continuous_features = continuous_features;
  for (size_t k = 0; k < indices.size(); ++k) {
    const int i = indices[k];
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(i);
    out.labels.push_back(labels[i]);
    out.groups.push_back(groups[i]);
    if (has_proxy()) out.proxy.push_back(proxy[i]);
  }
  return out;
}

void Dataset::AttachProxy(std::vector<int> proxy_groups) {
  if (static_cast<int>(proxy_groups.size()) != size()) {
    throw ShapeError("proxy annotations must cover every sample");
  }
  for (const int g : proxy_groups) {
    if (g < 0 || g >= kNumGroups) throw DataError("proxy group out of range");
  }
  proxy = std::move(proxy_groups);
}

void Dataset::Validate() const {
  const auto n = static_cast<size_t>(features.rows());
  if (labels.size() != n || groups.size() != n ||
      (!proxy.empty() && proxy.size() != n)) {
    throw ShapeError("dataset columns differ in length");
  }
  if (!features.allFinite()) throw NumericError("non-finite feature value");
  for (const int y : labels) {
    if (y < 0 || y >= kNumClasses) throw DataError("label out of range");
  }
  for (const int a : groups) {
    if (a != kUnknownGroup && (a < 0 || a >= kNumGroups)) {
      throw DataError("group out of range");
    }
  }
}

ColumnKind DatasetSchema::kind(const std::string& column) const {
  for (const auto& [name, k] : columns) {
    if (name == column) return k;
  }
  throw DataError("unknown column '" + column + "'");
}

void DatasetSchema::Validate() const {
  int labels = 0;
  int sensitives = 0;
  for (const auto& [name, k] : columns) {
    labels += k == ColumnKind::kLabel;
    sensitives += k == ColumnKind::kSensitive;
  }
  if (labels != 1 || label_column.empty() ||
      kind(label_column) != ColumnKind::kLabel) {
    throw DataError("schema needs exactly one label column named by label=");
  }
  if (sensitives > 1) throw DataError("schema allows at most one sensitive column");
  if (sensitives == 1 && (sensitive_column.empty() ||
                          kind(sensitive_column) != ColumnKind::kSensitive)) {
    throw DataError("sensitive= must name the sensitive column");
  }
  if (desired_values.empty()) throw DataError("schema needs desired=");
  if (!sensitive_column.empty() && privileged_values.empty()) {
    throw DataError("schema needs privileged= with a sensitive column");
  }
}

DatasetSchema ParseSchema(const std::string& text) {
  DatasetSchema schema;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("schema line " + std::to_string(line_no) +
                      " is not key=value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.rfind("column.", 0) == 0) {
      const auto dot = key.rfind('.');
      if (dot <= 7 || key.substr(dot) != ".kind") {
        throw DataError("schema key '" + key + "' should be column.<name>.kind");
      }
      const std::string name = key.substr(7, dot - 7);
      schema.columns.emplace_back(name, ParseKind(name, value));
    } else if (key == "label") {
      schema.label_column = value;
    } else if (key == "desired") {
      schema.desired_values = SplitList(value);
    } else if (key == "sensitive") {
      schema.sensitive_column = value;
    } else if (key == "privileged") {
      schema.privileged_values = SplitList(value);
    } else if (key == "missing") {
      schema.missing_token = value;
    } else if (key == "sensitive_as_feature") {
      schema.sensitive_as_feature = ParseBool(key, value);
    } else if (key == "drop_missing_rows") {
      schema.drop_missing_rows = ParseBool(key, value);
    } else if (key == "expected_dim") {
      schema.expected_dim = std::stoi(value);
    } else {
      throw DataError("unknown schema key '" + key + "'");
    }
  }
  schema.Validate();
  return schema;
}

DatasetSchema LoadSchema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseSchema(buffer.str());
}

std::string FormatSchema(const DatasetSchema& schema) {
  std::string out;
  for (const auto& [name, k] : schema.columns) {
    out += "column." + name + ".kind=" + KindName(k) + "\n";
  }
  out += "label=" + schema.label_column + "\n";
  out += "desired=" + JoinList(schema.desired_values) + "\n";
  if (!schema.sensitive_column.empty()) {
    out += "sensitive=" + schema.sensitive_column + "\n";
    out += "privileged=" + JoinList(schema.privileged_values) + "\n";
  }
  out += "missing=" + schema.missing_token + "\n";
  out += std::string("sensitive_as_feature=") +
         (schema.sensitive_as_feature ? "true" : "false") + "\n";
  out += std::string("drop_missing_rows=") +
         (schema.drop_missing_rows ? "true" : "false") + "\n";
  if (schema.expected_dim) {
    out += "expected_dim=" + std::to_string(*schema.expected_dim) + "\n";
  }
  return out;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(Trim(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(Trim(current));
  return fields;
}

Dataset IngestCsv(const std::filesystem::path& path,
                  const DatasetSchema& schema, IngestReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return IngestCsvText(buffer.str(), schema, report);
}

Dataset IngestCsvText(const std::string& text, const DatasetSchema& schema,
                      IngestReport* report) {
  schema.Validate();
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV file");
  const std::vector<std::string> header = SplitCsvLine(line);

  // Every header column must be declared and every declared column present.
  std::vector<ColumnKind> kinds;
  for (const std::string& name : header) kinds.push_back(schema.kind(name));
  for (const auto& [name, k] : schema.columns) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw DataError("schema column '" + name + "' is missing from the CSV");
    }
  }

  auto is_missing = [&](const std::string& v) {
    return v.empty() || v == schema.missing_token;
  };
  auto encoded_as_category = [&](size_t c) {
    return kinds[c] == ColumnKind::kCategorical ||
           (kinds[c] == ColumnKind::kSensitive && schema.sensitive_as_feature);
  };

  IngestReport local;
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    ++local.rows_read;
    std::vector<std::string> fields = SplitCsvLine(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    bool drop = false;
    for (size_t c = 0; c < header.size(); ++c) {
      if (!is_missing(fields[c])) continue;
      if (kinds[c] == ColumnKind::kLabel) drop = true;
      if (schema.drop_missing_rows && kinds[c] != ColumnKind::kIgnore) {
        drop = true;
      }
    }
    if (drop) {
      ++local.rows_dropped;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DataError("dataset is empty after ingestion");

  // Category vocabularies in first-appearance order.
  std::vector<std::vector<std::string>> vocab(header.size());
  std::vector<std::unordered_map<std::string, int>> vocab_index(header.size());
  for (const auto& row : rows) {
    for (size_t c = 0; c < header.size(); ++c) {
      if (!encoded_as_category(c)) continue;
      const std::string value = is_missing(row[c]) ? kMissingCategory : row[c];
      if (vocab_index[c].emplace(value, static_cast<int>(vocab[c].size()))
              .second) {
        vocab[c].push_back(value);
      }
    }
  }

  Dataset out;
  std::vector<int> offsets(header.size(), -1);
  int dim = 0;
  for (size_t c = 0; c < header.size(); ++c) {
    if (encoded_as_category(c)) {
      offsets[c] = dim;
      for (const auto& v : vocab[c]) {
        out.feature_names.push_back(header[c] + "=" + v);
      }
      dim += static_cast<int>(vocab[c].size());
      local.categories[header[c]] = vocab[c];
    } else if (kinds[c] == ColumnKind::kContinuous) {
      offsets[c] = dim;
      out.feature_names.push_back(header[c]);
      out.continuous_features.push_back(dim);
      dim += 1;
    }
  }
  local.feature_dim = dim;
  if (schema.expected_dim && *schema.expected_dim != dim) {
    throw DataError("feature dimension " + std::to_string(dim) +
                    " does not match expected_dim " +
                    std::to_string(*schema.expected_dim));
  }

  out.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    int y = 0;
    int a = kUnknownGroup;
    for (size_t c = 0; c < header.size(); ++c) {
      const std::string& v = row[c];
      if (encoded_as_category(c)) {
        const std::string key = is_missing(v) ? kMissingCategory : v;
        out.features(static_cast<Eigen::Index>(r),
                     offsets[c] + vocab_index[c].at(key)) = 1.0;
      }
      switch (kinds[c]) {
        case ColumnKind::kContinuous: {
          if (is_missing(v)) {
            throw DataError("missing value in continuous column '" +
                            header[c] + "'");
          }
          double parsed = 0.0;
          const auto res =
              std::from_chars(v.data(), v.data() + v.size(), parsed);
          if (res.ec != std::errc() || res.ptr != v.data() + v.size() ||
              !std::isfinite(parsed)) {
            throw DataError("unparseable numeric '" + v + "' in column '" +
                            header[c] + "'");
          }
          out.features(static_cast<Eigen::Index>(r), offsets[c]) = parsed;
          break;
        }
        case ColumnKind::kLabel:
          y = Contains(schema.desired_values, v) ? 1 : 0;
          break;
        case ColumnKind::kSensitive:
          if (!is_missing(v)) a = Contains(schema.privileged_values, v) ? 1 : 0;
          break;
        default:
          break;
      }
    }
    out.labels.push_back(y);
    out.groups.push_back(a);
  }
  if (report) *report = std::move(local);
  return out;
}

void Standardizer::Apply(Dataset* dataset) const {
  for (size_t k = 0; k < columns.size(); ++k) {
    auto col = dataset->features.col(columns[k]);
    col = (col.array() - mean[k]) / scale[k];
  }
}

Splits Split(const Dataset& dataset, const SplitSpec& spec) {
  const int n = dataset.size();
  std::array<int, 3> counts{};
  if (spec.counts) {
    counts = *spec.counts;
    if (counts[0] < 0 || counts[1] < 0 || counts[2] < 0 ||
        counts[0] + counts[1] + counts[2] != n) {
      throw ConfigError("split counts " + std::to_string(counts[0]) + "/" +
                        std::to_string(counts[1]) + "/" +
                        std::to_string(counts[2]) + " do not sum to " +
                        std::to_string(n));
    }
  } else {
    const auto& f = spec.fractions;
    if (f[0] < 0 || f[1] < 0 || f[2] < 0 ||
        std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
      throw ConfigError("split fractions must be non-negative and sum to 1");
    }
    counts[0] = static_cast<int>(std::lround(f[0] * n));
    counts[1] = std::min(n - counts[0], static_cast<int>(std::lround(f[1] * n)));
    counts[2] = n - counts[0] - counts[1];
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(spec.seed, "split"));
  Shuffle(&order, &rng);

  Splits out;
  out.train_indices.assign(order.begin(), order.begin() + counts[0]);
  out.valid_indices.assign(order.begin() + counts[0],
                           order.begin() + counts[0] + counts[1]);
  out.test_indices.assign(order.begin() + counts[0] + counts[1], order.end());
  out.train = dataset.Subset(out.train_indices);
  out.valid = dataset.Subset(out.valid_indices);
  out.test = dataset.Subset(out.test_indices);

  if (spec.standardize && counts[0] > 0) {
    Standardizer& s = out.standardizer;
    for (const int c : dataset.continuous_features) {
      const auto col = out.train.features.col(c);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().mean();
      const double sd = std::sqrt(var);
      s.columns.push_back(c);
      s.mean.push_back(mean);
      s.scale.push_back(sd > 1e-12 ? sd : 1.0);
    }
    s.Apply(&out.train);
    s.Apply(&out.valid);
    s.Apply(&out.test);
  }
  return out;
}

std::vector<std::vector<int>> Batches(int n, int batch_size, uint64_t seed,
                                      int epoch) {
  if (batch_size < 2) {
    throw ConfigError("batch size must be at least 2 to form pairs");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(MixSeed(DeriveSeed(seed, "shuffle") ^
                  MixSeed(static_cast<uint64_t>(epoch))));
  Shuffle(&order, &rng);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

std::optional<int> SamplePair(std::span<const int> batch, int anchor,
                              std::span<const int> labels,
                              std::span<const int> groups, Rng& rng) {
  const int group = groups[anchor];
  if (group == kUnknownGroup) return std::nullopt;
  std::vector<int> candidates;
  for (const int j : batch) {
    if (j == anchor) continue;
    if (labels[j] == labels[anchor] && groups[j] != group &&
        groups[j] != kUnknownGroup) {
      candidates.push_back(j);
    }
  }
  if (candidates.empty()) return std::nullopt;
  return candidates[rng.Below(candidates.size())];
}

void SyntheticSpec::Validate() const {
  if (n <= 0) throw ConfigError("synthetic n must be positive");
  if (d < 2) throw ConfigError("synthetic d must be >= 2");
  for (const double r : group_rates) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("group rates must lie in [0, 1]");
    }
  }
  if (!(group_balance >= 0.0 && group_balance <= 1.0)) {
    throw ConfigError("group balance must lie in [0, 1]");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  spec.Validate();
  const int label_dims = (spec.d + 1) / 2;
  const int group_dims = spec.d - label_dims;
  Vector label_dir = Vector::Zero(spec.d);
  Vector group_dir = Vector::Zero(spec.d);
  label_dir.head(label_dims).setConstant(1.0 / std::sqrt(label_dims));
  group_dir.tail(group_dims).setConstant(1.0 / std::sqrt(group_dims));

  Rng rng(DeriveSeed(spec.seed, "synthetic"));
  Dataset out;
  out.features.resize(spec.n, spec.d);
  for (int i = 0; i < spec.n; ++i) {
    const int a = rng.Bernoulli(spec.group_balance) ? 0 : 1;
    const int y = rng.Bernoulli(spec.group_rates[a]) ? 1 : 0;
    Vector x = (2.0 * a - 1.0) * spec.group_shift * group_dir +
               (2.0 * y - 1.0) * spec.label_shift * label_dir;
    for (int k = 0; k < spec.d; ++k) x[k] += spec.noise * rng.Normal();
    out.features.row(i) = x.transpose();
    out.labels.push_back(y);
    out.groups.push_back(a);
  }
  for (int k = 0; k < spec.d; ++k) {
    out.feature_names.push_back("f" + std::to_string(k));
    out.continuous_features.push_back(k);
  }
  return out;
}

void WriteDatasetCsv(const Dataset& dataset,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  for (const auto& name : dataset.feature_names) out << '"' << name << "\",";
  out << "y,a,a_hat\n";
  for (int i = 0; i < dataset.size(); ++i) {
    for (int c = 0; c < dataset.dim(); ++c) out << dataset.features(i, c) << ',';
    out << dataset.labels[i] << ',';
    if (dataset.groups[i] != kUnknownGroup) out << dataset.groups[i];
    out << ',';
    if (dataset.has_proxy()) out << dataset.proxy[i];
    out << '\n';
  }
}

}  // namespace rnf::data

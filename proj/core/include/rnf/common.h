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

// Shared vocabulary: matrix aliases, error types and the seeded random
// streams every component draws from.

#ifndef RNF_COMMON_H_
#define RNF_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace rnf {

// Row-major batches: one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Invalid or inconsistent configuration (bad hyper-parameter, unknown key,
// missing annotation source). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between an input and the model or between two inputs.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite input values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter update or a loss became non-finite. `where` is the layer index
// for optimizer failures and the epoch index for training failures.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int where)
      : std::runtime_error(what), where_(where) {}
  int where() const { return where_; }

 private:
  int where_;
};

// Malformed input files (CSV, schema, annotations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptCheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Derives an independent seed for a named sub-stream ("init", "dropout",
// "shuffle", "pairs", ...) of a run seed.
uint64_t DeriveSeed(uint64_t base, std::string_view stream);

// SplitMix64 finalizer, exposed for index-based seed mixing.
uint64_t MixSeed(uint64_t x);

// Deterministic random stream, identical across toolchains. Conversions are
// hand-written; no std::*_distribution is used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  uint64_t Below(uint64_t n);
  bool Bernoulli(double p) { return Uniform() < p; }
  // Standard normal via Box-Muller.
  double Normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rnf

#endif  // RNF_COMMON_H_

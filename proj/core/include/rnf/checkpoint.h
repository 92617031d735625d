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

// Binary model checkpoints.
//
// Little-endian layout:
//   "RNF1" | u32 version | u32 count | u32 dims[count] | u32 encoder_depth |
//   f32 dropout | per layer: f32 weights (row-major, out x in), f32 biases |
//   32-byte SHA-256 digest of the config snapshot
//
// Parameters are stored at single precision, so a saved model reloads with
// f32-rounded parameters and saving that again yields identical bytes.

#ifndef RNF_CHECKPOINT_H_
#define RNF_CHECKPOINT_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "rnf/nn.h"

namespace rnf::checkpoint {

inline constexpr uint32_t kFormatVersion = 1;
inline constexpr char kMagic[4] = {'R', 'N', 'F', '1'};

using Digest = std::array<uint8_t, 32>;

Digest ConfigDigest(const std::string& config_text);
std::string DigestHex(const Digest& digest);

std::string Serialize(const nn::Model& model, const Digest& digest);

// Throws CorruptCheckpointError on bad magic, version, dimensions or length.
nn::Model Deserialize(const std::string& bytes, Digest* digest = nullptr);

void Save(const nn::Model& model, const std::filesystem::path& path,
          const Digest& digest);
nn::Model Load(const std::filesystem::path& path, Digest* digest = nullptr);

// Parameters rounded to f32 and back, as a save/load round trip would.
nn::Model RoundToFloat(const nn::Model& model);

}  // namespace rnf::checkpoint

#endif  // RNF_CHECKPOINT_H_

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

#include "rnf/checkpoint.h"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rnf::checkpoint {
namespace {

void PutU32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutF32(std::string* out, double v) {
  PutU32(out, std::bit_cast<uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double F32() { return std::bit_cast<float>(U32()); }
  void Need(size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CorruptCheckpointError("checkpoint truncated at byte " +
                                   std::to_string(pos_));
    }
  }
  size_t pos() const { return pos_; }
  void Skip(size_t n) {
    Need(n);
    pos_ += n;
  }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

Digest ConfigDigest(const std::string& config_text) {
  Digest d;
  SHA256(reinterpret_cast<const unsigned char*>(config_text.data()),
         config_text.size(), d.data());
  return d;
}

std::string DigestHex(const Digest& digest) {
  static const char kHex[] = "0123456789abcdef";
  std::string out;
  for (const uint8_t b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

std::string Serialize(const nn::Model& model, const Digest& digest) {
  std::string out(kMagic, 4);
  PutU32(&out, kFormatVersion);
  PutU32(&out, static_cast<uint32_t>(model.layer_dims().size()));
  for (const int d : model.layer_dims()) PutU32(&out, static_cast<uint32_t>(d));
  PutU32(&out, static_cast<uint32_t>(model.encoder_depth()));
  PutF32(&out, model.dropout_rate());
  for (const nn::Layer& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        PutF32(&out, layer.weight(r, c));
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) PutF32(&out, layer.bias[r]);
  }
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

nn::Model Deserialize(const std::string& bytes, Digest* digest) {
  Reader in(bytes);
  in.Need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptCheckpointError("bad checkpoint magic");
  }
  in.Skip(4);
  const uint32_t version = in.U32();
  if (version != kFormatVersion) {
    throw CorruptCheckpointError("unsupported checkpoint version " +
                                 std::to_string(version));
  }
  const uint32_t count = in.U32();
  if (count < 3 || count > 1024) {
    throw CorruptCheckpointError("implausible layer count " +
                                 std::to_string(count));
  }
  std::vector<int> dims;
  uint64_t params = 0;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t d = in.U32();
    if (d == 0 || d > (1u << 24)) {
      throw CorruptCheckpointError("implausible layer width " + std::to_string(d));
    }
    if (i > 0) params += static_cast<uint64_t>(d) * (dims.back() + 1);
    dims.push_back(static_cast<int>(d));
  }
  const uint32_t depth = in.U32();
  const double dropout = in.F32();
  const uint64_t expected = in.pos() + 4 * params + 32;
  if (bytes.size() != expected) {
    throw CorruptCheckpointError("checkpoint length " +
                                 std::to_string(bytes.size()) + " != expected " +
                                 std::to_string(expected));
  }
  nn::Model model = [&] {
    try {
      return nn::Model(dims, static_cast<int>(depth), dropout);
    } catch (const ConfigError& e) {
      throw CorruptCheckpointError(std::string("invalid checkpoint header: ") +
                                   e.what());
    }
  }();
  for (nn::Layer& layer : model.mutable_layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = in.F32();
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = in.F32();
  }
  if (digest) std::memcpy(digest->data(), bytes.data() + in.pos(), 32);
  try {
    model.Validate();
  } catch (const std::exception& e) {
    throw CorruptCheckpointError(std::string("invalid checkpoint parameters: ") +
                                 e.what());
  }
  return model;
}

void Save(const nn::Model& model, const std::filesystem::path& path,
          const Digest& digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string bytes = Serialize(model, digest);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

nn::Model Load(const std::filesystem::path& path, Digest* digest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpointError("cannot read checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Deserialize(buffer.str(), digest);
}

nn::Model RoundToFloat(const nn::Model& model) {
  nn::Model out = model;
  for (nn::Layer& layer : out.mutable_layers()) {
    layer.weight = layer.weight.cast<float>().cast<double>();
    layer.bias = layer.bias.cast<float>().cast<double>();
  }
  out.set_dropout_rate(static_cast<float>(model.dropout_rate()));
  return out;
}

}  // namespace rnf::checkpoint

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

#include "rnf/nn.h"

#include <cmath>
#include <string>
#include <utility>

namespace rnf::nn {
namespace {

// Dropout follows the first two layers, and only when they are hidden.
constexpr int kDropoutLayers = 2;

bool HasDropout(const Model& model, int layer) {
  return model.dropout_rate() > 0.0 && layer < kDropoutLayers &&
         layer < model.num_layers() - 1;
}

void GlorotFill(Layer* layer, Rng* rng) {
  const double fan_out = static_cast<double>(layer->weight.rows());
  const double fan_in = static_cast<double>(layer->weight.cols());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index r = 0; r < layer->weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer->weight.cols(); ++c) {
      layer->weight(r, c) = rng->Uniform(-limit, limit);
    }
  }
  layer->bias.setZero();
}

Matrix DropoutMask(Eigen::Index rows, Eigen::Index cols, double rate,
                   uint64_t seed, int layer) {
  Rng rng(MixSeed(seed ^ MixSeed(static_cast<uint64_t>(layer) + 1)));
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.Uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

}  // namespace

Model::Model(std::vector<int> layer_dims, int encoder_depth,
             double dropout_rate)
    : layer_dims_(std::move(layer_dims)),
      encoder_depth_(encoder_depth),
      dropout_rate_(dropout_rate) {
  if (layer_dims_.size() < 3) {
    throw ConfigError("a model needs at least two layers (three dims)");
  }
  for (const int d : layer_dims_) {
    if (d <= 0) throw ConfigError("layer dims must be positive");
  }
  if (encoder_depth_ <= 0 ||
      encoder_depth_ >= static_cast<int>(layer_dims_.size()) - 1) {
    throw ConfigError("encoder_depth must satisfy 0 < depth < num_layers, got " +
                      std::to_string(encoder_depth_));
  }
  if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  for (size_t i = 0; i + 1 < layer_dims_.size(); ++i) {
    layers_.push_back(
        Layer{Matrix::Zero(layer_dims_[i + 1], layer_dims_[i]),
              Vector::Zero(layer_dims_[i + 1])});
  }
}

Model Model::Initialized(std::vector<int> layer_dims, int encoder_depth,
                         double dropout_rate, uint64_t seed) {
  Model model(std::move(layer_dims), encoder_depth, dropout_rate);
  model.ReinitializeFrom(0, seed);
  return model;
}

void Model::ReinitializeFrom(int first, uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < num_layers(); ++i) {
    // Every layer draws; layer i's values are independent of `first`.
    Layer fresh{Matrix(layers_[i].weight.rows(), layers_[i].weight.cols()),
                Vector(layers_[i].bias.size())};
    GlorotFill(&fresh, &rng);
    if (i >= first) layers_[i] = std::move(fresh);
  }
}

void Model::set_encoder_depth(int depth) {
  if (depth <= 0 || depth >= num_layers()) {
    throw ConfigError("encoder_depth must satisfy 0 < depth < num_layers, got " +
                      std::to_string(depth));
  }
  encoder_depth_ = depth;
}

void Model::set_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  dropout_rate_ = rate;
}

void Model::Validate() const {
  if (static_cast<int>(layer_dims_.size()) != num_layers() + 1) {
    throw ShapeError("layer count does not match layer_dims");
  }
  for (int i = 0; i < num_layers(); ++i) {
    const Layer& l = layers_[i];
    if (l.weight.rows() != layer_dims_[i + 1] ||
        l.weight.cols() != layer_dims_[i] ||
        l.bias.size() != layer_dims_[i + 1]) {
      throw ShapeError("layer " + std::to_string(i) +
                       " shape does not chain with layer_dims");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw NumericError("layer " + std::to_string(i) +
                         " has non-finite parameters");
    }
  }
  if (encoder_depth_ <= 0 || encoder_depth_ >= num_layers()) {
    throw ShapeError("encoder_depth out of range");
  }
}

int Model::FirstTrainable(Scope scope) const {
  switch (scope) {
    case Scope::kAll:
      return 0;
    case Scope::kHeadOnly:
      return encoder_depth_;
    case Scope::kLastLayer:
      return num_layers() - 1;
  }
  return 0;
}

int64_t Model::num_parameters() const {
  int64_t n = 0;
  for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool operator==(const Model& a, const Model& b) {
  if (a.layer_dims_ != b.layer_dims_ || a.encoder_depth_ != b.encoder_depth_ ||
      a.dropout_rate_ != b.dropout_rate_) {
    return false;
  }
  for (int i = 0; i < a.num_layers(); ++i) {
    if (a.layers_[i].weight != b.layers_[i].weight ||
        a.layers_[i].bias != b.layers_[i].bias) {
      return false;
    }
  }
  return true;
}

Gradients Gradients::ZerosLike(const Model& model, int first_trainable) {
  Gradients g;
  g.layers.resize(model.num_layers());
  for (int i = first_trainable; i < model.num_layers(); ++i) {
    const Layer& l = model.layer(i);
    g.layers[i] = Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                        Vector::Zero(l.bias.size())};
  }
  return g;
}

void Gradients::Add(const Gradients& other, double scale) {
  if (layers.size() < other.layers.size()) layers.resize(other.layers.size());
  for (size_t i = 0; i < other.layers.size(); ++i) {
    if (!other.layers[i]) continue;
    if (!layers[i]) {
      layers[i] = Layer{other.layers[i]->weight * scale,
                        other.layers[i]->bias * scale};
    } else {
      layers[i]->weight += scale * other.layers[i]->weight;
      layers[i]->bias += scale * other.layers[i]->bias;
    }
  }
}

void Gradients::Scale(double factor) {
  for (auto& l : layers) {
    if (!l) continue;
    l->weight *= factor;
    l->bias *= factor;
  }
}

bool Gradients::AllZero() const {
  for (const auto& l : layers) {
    if (l && (!l->weight.isZero(0.0) || !l->bias.isZero(0.0))) return false;
  }
  return true;
}

Matrix Softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double max = logits.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(r, c) = std::exp(logits(r, c) - max);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return out;
}

ForwardTrace ForwardRange(const Model& model, const Matrix& input, int first,
                          int last, Mode mode, uint64_t seed) {
  if (first < 0 || last > model.num_layers() || first >= last) {
    throw ShapeError("invalid layer range [" + std::to_string(first) + ", " +
                     std::to_string(last) + ")");
  }
  if (input.cols() != model.layer_dims()[first]) {
    throw ShapeError("input width " + std::to_string(input.cols()) +
                     " does not match layer_dims[" + std::to_string(first) +
                     "] = " + std::to_string(model.layer_dims()[first]));
  }
  if (!input.allFinite()) throw NumericError("non-finite input");

  ForwardTrace trace;
  trace.first_layer = first;
  trace.last_layer = last;
  Matrix current = input;
  for (int i = first; i < last; ++i) {
    const Layer& layer = model.layer(i);
    trace.inputs.push_back(current);
    Matrix pre = current * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    const bool is_output = i == model.num_layers() - 1;
    if (is_output) {
      trace.pre_activations.push_back(pre);
      trace.activations.emplace_back();
      trace.dropout_masks.emplace_back();
      current = std::move(pre);
      continue;
    }
    Matrix act = pre.cwiseMax(0.0);
    trace.pre_activations.push_back(std::move(pre));
    if (mode == Mode::kTrain && HasDropout(model, i)) {
      Matrix mask = DropoutMask(act.rows(), act.cols(), model.dropout_rate(),
                                seed, i);
      current = act.cwiseProduct(mask);
      trace.dropout_masks.push_back(std::move(mask));
    } else {
      current = act;
      trace.dropout_masks.emplace_back();
    }
    trace.activations.push_back(std::move(act));
  }
  trace.output = std::move(current);
  if (last == model.num_layers()) trace.probabilities = Softmax(trace.output);
  return trace;
}

ForwardTrace Forward(const Model& model, const Matrix& x, Mode mode,
                     uint64_t seed) {
  return ForwardRange(model, x, 0, model.num_layers(), mode, seed);
}

Matrix Encode(const Model& model, const Matrix& x) {
  return ForwardRange(model, x, 0, model.encoder_depth(), Mode::kEval).output;
}

Matrix HeadLogits(const Model& model, const Matrix& z, Mode mode,
                  uint64_t seed) {
  return ForwardRange(model, z, model.encoder_depth(), model.num_layers(), mode,
                      seed)
      .output;
}

Matrix HeadForward(const Model& model, const Matrix& z) {
  return Softmax(HeadLogits(model, z));
}

Vector Forward(const Model& model, const Vector& x) {
  return Forward(model, Matrix(x.transpose()), Mode::kEval)
      .probabilities.row(0)
      .transpose();
}

Vector Encode(const Model& model, const Vector& x) {
  return Encode(model, Matrix(x.transpose())).row(0).transpose();
}

Vector HeadForward(const Model& model, const Vector& z) {
  return HeadForward(model, Matrix(z.transpose())).row(0).transpose();
}

BackwardResult BackwardFrom(const Model& model, const ForwardTrace& trace,
                            const Matrix& d_output, int first_trainable) {
  const int count = trace.last_layer - trace.first_layer;
  if (count <= 0 || static_cast<int>(trace.inputs.size()) != count ||
      trace.last_layer > model.num_layers()) {
    throw ShapeError("stale trace: layer range does not match the model");
  }
  for (int k = 0; k < count; ++k) {
    const Layer& layer = model.layer(trace.first_layer + k);
    if (trace.inputs[k].cols() != layer.weight.cols() ||
        trace.pre_activations[k].cols() != layer.weight.rows()) {
      throw ShapeError("stale trace: cached activations do not match layer " +
                       std::to_string(trace.first_layer + k));
    }
  }
  if (d_output.rows() != trace.output.rows() ||
      d_output.cols() != trace.output.cols()) {
    throw ShapeError("upstream gradient shape does not match trace output");
  }

  BackwardResult result;
  result.gradients.layers.resize(model.num_layers());
  Matrix delta = d_output;  // dLoss/d(output of layer k, post-dropout)
  for (int k = count - 1; k >= 0; --k) {
    const int index = trace.first_layer + k;
    const Layer& layer = model.layer(index);
    const bool is_output = index == model.num_layers() - 1;
    if (!is_output) {
      if (trace.dropout_masks[k].size() > 0) {
        delta = delta.cwiseProduct(trace.dropout_masks[k]);
      }
      const Matrix& pre = trace.pre_activations[k];
      delta = delta.cwiseProduct(
          (pre.array() > 0.0).cast<double>().matrix());
    }
    if (index >= first_trainable) {
      result.gradients.layers[index] =
          Layer{delta.transpose() * trace.inputs[k],
                delta.colwise().sum().transpose()};
    }
    delta = delta * layer.weight;
  }
  result.input_gradient = std::move(delta);
  return result;
}

Gradients Backward(const Model& model, const ForwardTrace& trace,
                   const Matrix& d_logits, Scope scope) {
  if (trace.first_layer != 0 || trace.last_layer != model.num_layers()) {
    throw ShapeError("Backward expects a full forward trace");
  }
  return BackwardFrom(model, trace, d_logits, model.FirstTrainable(scope))
      .gradients;
}

AdamState AdamState::For(const Model& model, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const Layer& l : model.layers()) {
    state.first_moment.push_back(
        Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()),
              Vector::Zero(l.bias.size())});
    state.second_moment.push_back(state.first_moment.back());
  }
  return state;
}

void AdamStep(Model* model, const Gradients& grads, AdamState* state) {
  if (state->first_moment.size() != static_cast<size_t>(model->num_layers())) {
    *state = AdamState::For(*model, state->learning_rate);
  }
  for (size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g && (!g->weight.allFinite() || !g->bias.allFinite())) {
      throw DivergenceError(
          "non-finite gradient in layer " + std::to_string(i), static_cast<int>(i));
    }
  }
  state->step += 1;
  const double t = static_cast<double>(state->step);
  const double correction1 = 1.0 - std::pow(state->beta1, t);
  const double correction2 = 1.0 - std::pow(state->beta2, t);
  const double b1 = state->beta1;
  const double b2 = state->beta2;
  const double lr = state->learning_rate;
  const double eps = state->epsilon;

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + eps);
  };

  for (size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (!g) continue;
    Layer& layer = model->mutable_layer(static_cast<int>(i));
    update(layer.weight, g->weight, state->first_moment[i].weight,
           state->second_moment[i].weight);
    update(layer.bias, g->bias, state->first_moment[i].bias,
           state->second_moment[i].bias);
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw DivergenceError(
          "non-finite parameters after update in layer " + std::to_string(i),
          static_cast<int>(i));
    }
  }
}

}  // namespace rnf::nn

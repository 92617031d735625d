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

// Fully connected ReLU network with exact reverse-mode gradients and Adam.
//
// A model is a chain of affine layers. Layers [0, encoder_depth) form the
// encoder g(x) = z, layers [encoder_depth, L) form the classification head
// c(z). Hidden activations are ReLU; the last layer emits logits. Dropout
// (inverted scaling) follows the first two hidden layers in training mode.
//
// All batch arguments hold one sample per row.

#ifndef RNF_NN_H_
#define RNF_NN_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "rnf/common.h"

namespace rnf::nn {

enum class Mode { kTrain, kEval };

// Which parameters receive gradients. kHeadOnly freezes the encoder;
// kLastLayer freezes everything except the final affine layer.
enum class Scope { kAll, kHeadOnly, kLastLayer };

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

class Model {
 public:
  // Zero-initialized parameters.
  Model(std::vector<int> layer_dims, int encoder_depth, double dropout_rate);

  // Glorot-uniform weights, zero biases.
  static Model Initialized(std::vector<int> layer_dims, int encoder_depth,
                           double dropout_rate, uint64_t seed);

  const std::vector<int>& layer_dims() const { return layer_dims_; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  int encoder_depth() const { return encoder_depth_; }
  double dropout_rate() const { return dropout_rate_; }
  int input_dim() const { return layer_dims_.front(); }
  int output_dim() const { return layer_dims_.back(); }
  int representation_dim() const { return layer_dims_[encoder_depth_]; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const Layer& layer(int i) const { return layers_[i]; }
  Layer& mutable_layer(int i) { return layers_[i]; }

  void set_encoder_depth(int depth);
  void set_dropout_rate(double rate);

  // Re-draws the parameters of layers [first, L) with Glorot-uniform init.
  void ReinitializeFrom(int first, uint64_t seed);

  // Checks shape chaining, depth bounds and finiteness. Throws ShapeError or
  // NumericError.
  void Validate() const;

  // First layer index that receives gradients under `scope`.
  int FirstTrainable(Scope scope) const;

  // Total number of scalar parameters.
  int64_t num_parameters() const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  std::vector<int> layer_dims_;
  int encoder_depth_;
  double dropout_rate_;
  std::vector<Layer> layers_;
};

// Caches everything backprop needs for layers [first_layer, last_layer).
struct ForwardTrace {
  int first_layer = 0;
  int last_layer = 0;
  // inputs[i] is the (post-dropout) input fed to layer first_layer + i.
  std::vector<Matrix> inputs;
  // Pre-activations of each evaluated layer.
  std::vector<Matrix> pre_activations;
  // Post-ReLU activations (before dropout) of each hidden layer evaluated.
  std::vector<Matrix> activations;
  // Dropout multipliers (0 or 1/(1-rate)) after each layer; empty matrix when
  // no dropout was applied there.
  std::vector<Matrix> dropout_masks;
  // Output of the last evaluated layer. When last_layer == L these are logits.
  Matrix output;
  // Row-wise softmax of `output`; only filled when last_layer == L.
  Matrix probabilities;

  int batch_size() const { return static_cast<int>(output.rows()); }
};

// Per-layer gradients. Entries outside the training scope are absent.
struct Gradients {
  std::vector<std::optional<Layer>> layers;

  static Gradients ZerosLike(const Model& model, int first_trainable);
  void Add(const Gradients& other, double scale = 1.0);
  void Scale(double factor);
  bool AllZero() const;
};

// Full network on a batch. `seed` drives the dropout masks in kTrain mode and
// is ignored in kEval mode.
ForwardTrace Forward(const Model& model, const Matrix& x, Mode mode,
                     uint64_t seed = 0);

// Evaluates layers [first, last) starting from `input`, which must have the
// width of layer_dims[first].
ForwardTrace ForwardRange(const Model& model, const Matrix& input, int first,
                          int last, Mode mode, uint64_t seed = 0);

// Encoder output z = g(x) in eval mode.
Matrix Encode(const Model& model, const Matrix& x);

// Head logits c(z) before the softmax.
Matrix HeadLogits(const Model& model, const Matrix& z, Mode mode = Mode::kEval,
                  uint64_t seed = 0);

// Head probabilities softmax(c(z)) in eval mode.
Matrix HeadForward(const Model& model, const Matrix& z);

// Single-sample conveniences.
Vector Forward(const Model& model, const Vector& x);
Vector Encode(const Model& model, const Vector& x);
Vector HeadForward(const Model& model, const Vector& z);

// Row-wise numerically stable softmax.
Matrix Softmax(const Matrix& logits);

struct BackwardResult {
  Gradients gradients;
  // dLoss/d(trace input); the gradient w.r.t. x or z.
  Matrix input_gradient;
};

// Reverse pass for the layers recorded in `trace`, given dLoss/d(output).
// Only layers >= first_trainable get parameter gradients. Throws ShapeError
// when the trace does not match the model (stale trace).
BackwardResult BackwardFrom(const Model& model, const ForwardTrace& trace,
                            const Matrix& d_output, int first_trainable);

// Parameter gradients for a full forward trace under `scope`.
Gradients Backward(const Model& model, const ForwardTrace& trace,
                   const Matrix& d_logits, Scope scope);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step = 0;
  std::vector<Layer> first_moment;
  std::vector<Layer> second_moment;

  static AdamState For(const Model& model, double learning_rate);
};

// Bias-corrected Adam update of every layer present in `grads`. The step
// counter advances on every call. Throws DivergenceError naming the layer when
// a gradient or updated parameter is non-finite.
void AdamStep(Model* model, const Gradients& grads, AdamState* state);

}  // namespace rnf::nn

#endif  // RNF_NN_H_

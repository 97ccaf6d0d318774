// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode core for 1-D convolutional regressors: conv1d,
// dense and elementwise activation layers, MSE loss and Adam.
//
// Activations are batched as (channels, length * batch) matrices, column
// index b * length + l. A dense layer after a conv layer flattens each
// sample channel-major (feature c * length + l).

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace marble::nn {

enum class LayerKind : std::uint8_t { conv1d = 0, dense = 1, activation = 2 };
enum class Activation : std::uint8_t { relu = 0, tanh = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0;  // conv1d
  int in_dim = 0, out_dim = 0;                                                 // dense
  Activation activation = Activation::relu;

  static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride, int padding);
  static LayerSpec dense(int in_dim, int out_dim);
  static LayerSpec act(Activation a);

  bool has_params() const { return kind != LayerKind::activation; }
  int fan_in() const { return kind == LayerKind::conv1d ? in_channels * kernel : in_dim; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Output length of a conv layer: floor((L + 2p - k) / s) + 1.
int conv_output_length(int length, int kernel, int stride, int padding);

struct Shape {
  int channels = 0;
  int length = 0;
};

/// Propagates a per-sample input shape through the specs; throws
/// std::invalid_argument on incompatible layers.
std::vector<Shape> infer_shapes(const std::vector<LayerSpec>& specs, Shape input);

/// Weights are (out, fan_in); conv weights are indexed [o, c * kernel + k].
struct LayerParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  friend bool operator==(const LayerParams& a, const LayerParams& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
  }
};

struct Network {
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> params;  // one entry per spec, empty for activations
  std::uint64_t init_seed = 0;

  std::size_t parameter_count() const;
  friend bool operator==(const Network&, const Network&) = default;
};

/// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases.
Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed);

struct Tensor {
  Eigen::MatrixXd data;  // (channels, length * batch)
  int channels = 0;
  int length = 0;
  int batch = 0;

  static Tensor from_rows(const Eigen::MatrixXd& samples);  // batch x length, 1 channel
  double at(int b, int c, int l) const { return data(c, b * length + l); }
};

struct ForwardCache {
  std::vector<Tensor> inputs;          // input to each layer
  std::vector<Eigen::MatrixXd> cols;   // im2col buffers for conv layers
  std::vector<Tensor> outputs;         // activation outputs (for tanh/relu backward)
  bool valid = false;
};

Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<LayerParams> layers;
  void zero_like(const Network& net);
  void add(const Gradients& other);
};

struct BackwardOptions {
  bool param_grads = true;
  bool input_grad = true;
};

/// Reverse pass over a cached forward. Parameter gradients are accumulated
/// into `grads` (call zero_like first); returns dL/dinput when requested.
Tensor backward(const Network& net, const ForwardCache& cache, const Tensor& grad_output,
                Gradients* grads, BackwardOptions opts = {});

struct MseResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean of squared differences; for a batch (columns are samples) the loss
/// is the mean over samples of the per-sample mean.
MseResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct ParamView {
  std::span<double> value;
  std::span<const double> grad;
};

struct AdamState {
  std::vector<Eigen::VectorXd> m, v;
  std::int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// One Adam update with bias correction. Accumulators are sized on first
/// use; a shape change afterwards is an error.
void adam_step(std::span<const ParamView> blocks, AdamState& state, double lr);

std::vector<ParamView> param_views(Network& net, const Gradients& grads);

}  // namespace marble::nn

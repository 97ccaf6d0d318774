// SPDX-License-Identifier: Apache-2.0

#include "marble/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "marble/common.hpp"

namespace marble::nn {

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int kernel, int stride, int padding) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || padding < 0)
    throw std::invalid_argument("invalid conv1d layer parameters");
  return s;
}

LayerSpec LayerSpec::dense(int in_dim, int out_dim) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("dense dims must be positive");
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in_dim;
  s.out_dim = out_dim;
  return s;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

int conv_output_length(int length, int kernel, int stride, int padding) {
  const int span = length + 2 * padding - kernel;
  if (span < 0) throw std::invalid_argument("conv kernel longer than padded input");
  return span / stride + 1;
}

std::vector<Shape> infer_shapes(const std::vector<LayerSpec>& specs, Shape input) {
  std::vector<Shape> shapes;
  shapes.reserve(specs.size() + 1);
  shapes.push_back(input);
  Shape cur = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    switch (s.kind) {
      case LayerKind::conv1d:
        if (cur.channels != s.in_channels)
          throw std::invalid_argument("layer " + std::to_string(i) + ": expected " +
                                      std::to_string(s.in_channels) + " input channels, got " +
                                      std::to_string(cur.channels));
        cur = {s.out_channels, conv_output_length(cur.length, s.kernel, s.stride, s.padding)};
        break;
      case LayerKind::dense:
        if (cur.channels * cur.length != s.in_dim)
          throw std::invalid_argument("layer " + std::to_string(i) + ": expected " +
                                      std::to_string(s.in_dim) + " input features, got " +
                                      std::to_string(cur.channels * cur.length));
        cur = {s.out_dim, 1};
        break;
      case LayerKind::activation:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.weight.size() + p.bias.size());
  return n;
}

Network init_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  // Check what can be checked without an input length.
  int prev_channels = -1, prev_dense = -1;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    if (s.kind == LayerKind::conv1d) {
      if (prev_dense > 0) throw std::invalid_argument("conv1d after dense layer is unsupported");
      if (prev_channels > 0 && prev_channels != s.in_channels)
        throw std::invalid_argument("layer " + std::to_string(i) + ": channel mismatch");
      prev_channels = s.out_channels;
    } else if (s.kind == LayerKind::dense) {
      if (prev_dense > 0 && prev_dense != s.in_dim)
        throw std::invalid_argument("layer " + std::to_string(i) + ": dense dim mismatch");
      if (prev_dense < 0 && prev_channels > 0 && s.in_dim % prev_channels != 0)
        throw std::invalid_argument("layer " + std::to_string(i) + ": flatten size mismatch");
      prev_dense = s.out_dim;
    }
  }

  Network net;
  net.specs = specs;
  net.init_seed = seed;
  net.params.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    if (!s.has_params()) continue;
    const int out = s.kind == LayerKind::conv1d ? s.out_channels : s.out_dim;
    const int fan_in = s.fan_in();
    const double bound = std::sqrt(1.0 / fan_in);
    Rng rng(stream_key(seed, i, /*domain=*/3));
    LayerParams& p = net.params[i];
    p.weight.resize(out, fan_in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < fan_in; ++c) p.weight(r, c) = rng.uniform(-bound, bound);
    p.bias = Eigen::VectorXd::Zero(out);
  }
  return net;
}

Tensor Tensor::from_rows(const Eigen::MatrixXd& samples) {
  Tensor t;
  t.channels = 1;
  t.length = static_cast<int>(samples.cols());
  t.batch = static_cast<int>(samples.rows());
  t.data.resize(1, static_cast<Eigen::Index>(t.length) * t.batch);
  for (int b = 0; b < t.batch; ++b)
    for (int l = 0; l < t.length; ++l) t.data(0, b * t.length + l) = samples(b, l);
  return t;
}

namespace {

void im2col(const Tensor& in, const LayerSpec& s, int out_len, Eigen::MatrixXd& cols) {
  const int L = in.length, k = s.kernel;
  cols.setZero(static_cast<Eigen::Index>(s.in_channels) * k,
               static_cast<Eigen::Index>(out_len) * in.batch);
  for (int b = 0; b < in.batch; ++b) {
    for (int c = 0; c < s.in_channels; ++c) {
      for (int kk = 0; kk < k; ++kk) {
        const int row = c * k + kk;
        for (int lo = 0; lo < out_len; ++lo) {
          const int li = lo * s.stride + kk - s.padding;
          if (li >= 0 && li < L) cols(row, b * out_len + lo) = in.data(c, b * L + li);
        }
      }
    }
  }
}

Tensor col2im(const Eigen::MatrixXd& dcols, const LayerSpec& s, int in_len, int out_len, int batch) {
  Tensor g;
  g.channels = s.in_channels;
  g.length = in_len;
  g.batch = batch;
  g.data.setZero(s.in_channels, static_cast<Eigen::Index>(in_len) * batch);
  const int k = s.kernel;
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < s.in_channels; ++c) {
      for (int kk = 0; kk < k; ++kk) {
        const int row = c * k + kk;
        for (int lo = 0; lo < out_len; ++lo) {
          const int li = lo * s.stride + kk - s.padding;
          if (li >= 0 && li < in_len) g.data(c, b * in_len + li) += dcols(row, b * out_len + lo);
        }
      }
    }
  }
  return g;
}

// (C, L*B) -> (C*L, B)
Eigen::MatrixXd flatten(const Tensor& t) {
  if (t.length == 1) return t.data;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(t.channels) * t.length, t.batch);
  for (int b = 0; b < t.batch; ++b)
    for (int c = 0; c < t.channels; ++c)
      for (int l = 0; l < t.length; ++l) x(c * t.length + l, b) = t.data(c, b * t.length + l);
  return x;
}

Tensor unflatten(const Eigen::MatrixXd& x, int channels, int length, int batch) {
  Tensor t;
  t.channels = channels;
  t.length = length;
  t.batch = batch;
  if (length == 1) {
    t.data = x;
    return t;
  }
  t.data.resize(channels, static_cast<Eigen::Index>(length) * batch);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c)
      for (int l = 0; l < length; ++l) t.data(c, b * length + l) = x(c * length + l, b);
  return t;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& input, ForwardCache* cache) {
  if (cache) {
    cache->inputs.assign(net.specs.size(), Tensor{});
    cache->cols.assign(net.specs.size(), Eigen::MatrixXd{});
    cache->outputs.assign(net.specs.size(), Tensor{});
    cache->valid = false;
  }
  Tensor cur = input;
  for (std::size_t i = 0; i < net.specs.size(); ++i) {
    const LayerSpec& s = net.specs[i];
    if (cache) cache->inputs[i] = cur;
    Tensor next;
    next.batch = cur.batch;
    switch (s.kind) {
      case LayerKind::conv1d: {
        if (cur.channels != s.in_channels)
          throw std::invalid_argument("conv1d layer " + std::to_string(i) + ": shape mismatch");
        const int out_len = conv_output_length(cur.length, s.kernel, s.stride, s.padding);
        Eigen::MatrixXd cols;
        im2col(cur, s, out_len, cols);
        next.channels = s.out_channels;
        next.length = out_len;
        next.data.noalias() = net.params[i].weight * cols;
        next.data.colwise() += net.params[i].bias;
        if (cache) cache->cols[i] = std::move(cols);
        break;
      }
      case LayerKind::dense: {
        if (cur.channels * cur.length != s.in_dim)
          throw std::invalid_argument("dense layer " + std::to_string(i) + ": shape mismatch");
        Eigen::MatrixXd x = flatten(cur);
        next.channels = s.out_dim;
        next.length = 1;
        next.data.noalias() = net.params[i].weight * x;
        next.data.colwise() += net.params[i].bias;
        if (cache) cache->cols[i] = std::move(x);
        break;
      }
      case LayerKind::activation:
        next.channels = cur.channels;
        next.length = cur.length;
        if (s.activation == Activation::relu)
          next.data = cur.data.cwiseMax(0.0);
        else
          next.data = cur.data.array().tanh().matrix();
        if (cache) cache->outputs[i] = next;
        break;
    }
    cur = std::move(next);
  }
  if (cache) cache->valid = true;
  return cur;
}

void Gradients::zero_like(const Network& net) {
  layers.resize(net.params.size());
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    layers[i].weight = Eigen::MatrixXd::Zero(net.params[i].weight.rows(), net.params[i].weight.cols());
    layers[i].bias = Eigen::VectorXd::Zero(net.params[i].bias.size());
  }
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
}

Tensor backward(const Network& net, const ForwardCache& cache, const Tensor& grad_output,
                Gradients* grads, BackwardOptions opts) {
  if (!cache.valid || cache.inputs.size() != net.specs.size())
    throw std::logic_error("backward called without a matching forward cache");
  if (opts.param_grads && (!grads || grads->layers.size() != net.params.size()))
    throw std::invalid_argument("gradient accumulator not initialised");

  Tensor g = grad_output;
  for (std::size_t idx = net.specs.size(); idx-- > 0;) {
    const LayerSpec& s = net.specs[idx];
    const Tensor& in = cache.inputs[idx];
    const bool need_input = opts.input_grad || idx > 0;
    switch (s.kind) {
      case LayerKind::conv1d: {
        const Eigen::MatrixXd& cols = cache.cols[idx];
        if (opts.param_grads) {
          grads->layers[idx].weight.noalias() += g.data * cols.transpose();
          grads->layers[idx].bias += g.data.rowwise().sum();
        }
        if (need_input) {
          Eigen::MatrixXd dcols = net.params[idx].weight.transpose() * g.data;
          g = col2im(dcols, s, in.length, g.length, in.batch);
        }
        break;
      }
      case LayerKind::dense: {
        const Eigen::MatrixXd& x = cache.cols[idx];
        if (opts.param_grads) {
          grads->layers[idx].weight.noalias() += g.data * x.transpose();
          grads->layers[idx].bias += g.data.rowwise().sum();
        }
        if (need_input) {
          Eigen::MatrixXd dx = net.params[idx].weight.transpose() * g.data;
          g = unflatten(dx, in.channels, in.length, in.batch);
        }
        break;
      }
      case LayerKind::activation:
        if (s.activation == Activation::relu) {
          g.data = (in.data.array() > 0.0).select(g.data, 0.0);
        } else {
          const auto& y = cache.outputs[idx].data.array();
          g.data = (g.data.array() * (1.0 - y * y)).matrix();
        }
        break;
    }
    if (!need_input) return Tensor{};
  }
  return g;
}

MseResult mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  const double n = static_cast<double>(pred.size());
  MseResult r;
  const Eigen::MatrixXd diff = pred - target;
  r.loss = diff.squaredNorm() / n;
  r.grad = (2.0 / n) * diff;
  return r;
}

void adam_step(std::span<const ParamView> blocks, AdamState& state, double lr) {
  if (state.m.empty()) {
    for (const ParamView& b : blocks) {
      state.m.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.value.size())));
      state.v.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.value.size())));
    }
  }
  if (state.m.size() != blocks.size()) throw std::invalid_argument("adam_step: block count changed");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ParamView& b = blocks[i];
    if (b.value.size() != b.grad.size() ||
        static_cast<Eigen::Index>(b.value.size()) != state.m[i].size())
      throw std::invalid_argument("adam_step: shape mismatch in block " + std::to_string(i));
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < b.value.size(); ++j) {
      const double g = b.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      b.value[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

std::vector<ParamView> param_views(Network& net, const Gradients& grads) {
  std::vector<ParamView> views;
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    if (!net.specs[i].has_params()) continue;
    auto& p = net.params[i];
    const auto& g = grads.layers[i];
    views.push_back({{p.weight.data(), static_cast<std::size_t>(p.weight.size())},
                     {g.weight.data(), static_cast<std::size_t>(g.weight.size())}});
    views.push_back({{p.bias.data(), static_cast<std::size_t>(p.bias.size())},
                     {g.bias.data(), static_cast<std::size_t>(g.bias.size())}});
  }
  return views;
}

}  // namespace marble::nn

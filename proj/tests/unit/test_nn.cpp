// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "finite_diff.hpp"
#include "marble/common.hpp"
#include "marble/nn.hpp"

using namespace marble;
using namespace marble::nn;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * rng.uniform(-1, 1);
  return m;
}

// Probe loss sum(out .* R); checks every parameter and input gradient.
void check_gradients(Network net, const Tensor& input, std::uint64_t seed) {
  Rng rng(seed);
  ForwardCache cache;
  const Tensor out = forward(net, input, &cache);
  Tensor r = out;
  r.data = random_matrix(rng, static_cast<int>(out.data.rows()), static_cast<int>(out.data.cols()));
  Gradients grads;
  grads.zero_like(net);
  const Tensor gin = backward(net, cache, r, &grads);

  Tensor x = input;
  const auto probe = [&] { return forward(net, x).data.cwiseProduct(r.data).sum(); };
  const double h = 1e-5;
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    auto& p = net.params[i];
    for (Eigen::Index k = 0; k < p.weight.size(); ++k)
      CHECK(fd::rel_err(grads.layers[i].weight.data()[k], fd::central(probe, p.weight.data()[k], h), 1e-4) < 1e-5);
    for (Eigen::Index k = 0; k < p.bias.size(); ++k)
      CHECK(fd::rel_err(grads.layers[i].bias[k], fd::central(probe, p.bias[k], h), 1e-4) < 1e-5);
  }
  for (Eigen::Index k = 0; k < x.data.size(); ++k)
    CHECK(fd::rel_err(gin.data.data()[k], fd::central(probe, x.data.data()[k], h), 1e-4) < 1e-5);
}

}  // namespace

TEST_CASE("conv output length") {
  CHECK(conv_output_length(256, 5, 2, 2) == 128);
  Rng rng(4);
  for (int t = 0; t < 500; ++t) {
    const int k = 1 + static_cast<int>(rng.below(9));
    const int s = 1 + static_cast<int>(rng.below(5));
    const int p = static_cast<int>(rng.below(4));
    const int L = std::max(1, k - 2 * p) + static_cast<int>(rng.below(60));
    const int out = conv_output_length(L, k, s, p);
    CHECK(out == (L + 2 * p - k) / s + 1);
    // last window fits, one more does not
    CHECK((out - 1) * s + k <= L + 2 * p);
    CHECK(out * s + k > L + 2 * p);
  }
  CHECK_THROWS(conv_output_length(2, 5, 1, 0));
}

TEST_CASE("layer spec validation") {
  CHECK_THROWS(LayerSpec::conv(1, 4, 0, 1, 0));
  CHECK_THROWS(LayerSpec::conv(1, 4, 3, 0, 0));
  CHECK_THROWS(LayerSpec::conv(1, 4, 3, 1, -1));
  CHECK_THROWS(LayerSpec::dense(0, 3));
  CHECK_THROWS(infer_shapes({LayerSpec::dense(5, 3), LayerSpec::dense(4, 2)}, {1, 5}));
  CHECK_THROWS(init_network({LayerSpec::conv(1, 2, 3, 1, 1), LayerSpec::conv(3, 2, 3, 1, 1)}, 1));
  const auto shapes = infer_shapes({LayerSpec::conv(1, 4, 5, 2, 2), LayerSpec::act(Activation::relu),
                                    LayerSpec::dense(4 * 128, 7)},
                                   {1, 256});
  CHECK(shapes.back().channels == 7);
  CHECK(shapes.back().length == 1);
}

TEST_CASE("init_network") {
  const std::vector<LayerSpec> specs{LayerSpec::conv(1, 3, 5, 2, 2), LayerSpec::act(Activation::relu),
                                     LayerSpec::dense(3 * 8, 4), LayerSpec::dense(4, 2)};
  const Network a = init_network(specs, 42);
  const Network b = init_network(specs, 42);
  CHECK(a == b);
  CHECK_FALSE(a == init_network(specs, 43));
  CHECK(a.params[3].weight.rows() == 2);
  CHECK(a.params[3].weight.cols() == 4);
  CHECK(a.params[3].bias.size() == 2);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].has_params()) continue;
    const double bound = std::sqrt(1.0 / specs[i].fan_in());
    CHECK(a.params[i].weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(a.params[i].bias.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.parameter_count() == 3 * 5 + 3 + 24 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("forward examples") {
  Network id = init_network({LayerSpec::dense(3, 3)}, 1);
  id.params[0].weight = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd rows(2, 3);
  rows << 1, -2, 3, 0.5, 0.25, -7;
  const Tensor out = forward(id, Tensor::from_rows(rows));
  CHECK((out.data - rows.transpose()).cwiseAbs().maxCoeff() == 0.0);

  Network relu = init_network({LayerSpec::act(Activation::relu)}, 1);
  Eigen::MatrixXd v(1, 3);
  v << -1, 0, 2;
  const Tensor r = forward(relu, Tensor::from_rows(v));
  CHECK(r.at(0, 0, 0) == 0.0);
  CHECK(r.at(0, 0, 1) == 0.0);
  CHECK(r.at(0, 0, 2) == 2.0);

  // conv with a single tap copies the strided input
  Network conv = init_network({LayerSpec::conv(1, 1, 1, 2, 0)}, 1);
  conv.params[0].weight.setOnes();
  Eigen::MatrixXd seq(1, 6);
  seq << 1, 2, 3, 4, 5, 6;
  const Tensor c = forward(conv, Tensor::from_rows(seq));
  CHECK(c.length == 3);
  CHECK(c.at(0, 0, 1) == 3.0);

  CHECK_THROWS(forward(id, Tensor::from_rows(Eigen::MatrixXd::Ones(1, 4))));
}

TEST_CASE("conv matches a direct loop") {
  Rng rng(12);
  const LayerSpec s = LayerSpec::conv(3, 4, 5, 2, 2);
  Network net = init_network({s}, 8);
  net.params[0].bias = random_matrix(rng, 4, 1);
  Tensor x;
  x.channels = 3;
  x.length = 17;
  x.batch = 2;
  x.data = random_matrix(rng, 3, 17 * 2);
  const Tensor y = forward(net, x);
  const int L_out = conv_output_length(17, 5, 2, 2);
  REQUIRE(y.length == L_out);
  for (int b = 0; b < 2; ++b)
    for (int o = 0; o < 4; ++o)
      for (int l = 0; l < L_out; ++l) {
        double acc = net.params[0].bias[o];
        for (int c = 0; c < 3; ++c)
          for (int k = 0; k < 5; ++k) {
            const int pos = l * 2 + k - 2;
            if (pos >= 0 && pos < 17) acc += net.params[0].weight(o, c * 5 + k) * x.at(b, c, pos);
          }
        CHECK(y.at(b, o, l) == doctest::Approx(acc).epsilon(1e-13));
      }
}

TEST_CASE("backward examples") {
  const Network net = init_network({LayerSpec::dense(4, 3), LayerSpec::act(Activation::tanh)}, 5);
  ForwardCache cache;
  const Tensor out = forward(net, Tensor::from_rows(Eigen::MatrixXd::Ones(2, 4)), &cache);
  Tensor zero = out;
  zero.data.setZero();
  Gradients g;
  g.zero_like(net);
  const Tensor gin = backward(net, cache, zero, &g);
  CHECK(gin.data.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.layers[0].weight.cwiseAbs().maxCoeff() == 0.0);

  const Network t = init_network({LayerSpec::act(Activation::tanh)}, 1);
  ForwardCache tc;
  const Tensor z = forward(t, Tensor::from_rows(Eigen::MatrixXd::Zero(1, 3)), &tc);
  Tensor up = z;
  up.data << 0.3, -2.0, 5.0;
  const Tensor back = backward(t, tc, up, nullptr, {.param_grads = false, .input_grad = true});
  CHECK(back.data == up.data);

  ForwardCache empty;
  CHECK_THROWS(backward(net, empty, zero, &g));
}

TEST_CASE("single dense layer with MSE matches finite differences") {
  Rng rng(3);
  Network net = init_network({LayerSpec::dense(5, 2)}, 9);
  net.params[0].bias << 0.1, -0.2;
  const Eigen::MatrixXd rows = random_matrix(rng, 3, 5);
  const Eigen::MatrixXd target = random_matrix(rng, 2, 3);
  ForwardCache cache;
  const Tensor out = forward(net, Tensor::from_rows(rows), &cache);
  const MseResult m = mse_loss(out.data, target);
  Tensor up = out;
  up.data = m.grad;
  Gradients g;
  g.zero_like(net);
  backward(net, cache, up, &g);
  const auto loss = [&] { return mse_loss(forward(net, Tensor::from_rows(rows)).data, target).loss; };
  for (Eigen::Index k = 0; k < net.params[0].weight.size(); ++k)
    CHECK(fd::rel_err(g.layers[0].weight.data()[k], fd::central(loss, net.params[0].weight.data()[k], 1e-5)) < 1e-6);
  for (int k = 0; k < 2; ++k)
    CHECK(fd::rel_err(g.layers[0].bias[k], fd::central(loss, net.params[0].bias[k], 1e-5)) < 1e-6);
}

TEST_CASE("randomized network backward matches finite differences") {
  Rng rng(2025);
  for (int trial = 0; trial < 12; ++trial) {
    const int c0 = 1 + static_cast<int>(rng.below(3));
    const int c1 = 1 + static_cast<int>(rng.below(4));
    const int k = 1 + static_cast<int>(rng.below(6));
    const int s = 1 + static_cast<int>(rng.below(3));
    const int p = static_cast<int>(rng.below(3));
    const int L = k + static_cast<int>(rng.below(12));
    const int L1 = conv_output_length(L, k, s, p);
    const int hidden = 1 + static_cast<int>(rng.below(6));
    const Activation a = trial % 2 ? Activation::tanh : Activation::relu;
    std::vector<LayerSpec> specs{LayerSpec::conv(c0, c1, k, s, p), LayerSpec::act(a),
                                 LayerSpec::dense(c1 * L1, hidden), LayerSpec::act(Activation::tanh),
                                 LayerSpec::dense(hidden, 2)};
    Network net = init_network(specs, 100 + trial);
    for (auto& lp : net.params) lp.bias = random_matrix(rng, static_cast<int>(lp.bias.size()), 1, 0.3);
    Tensor x;
    x.channels = c0;
    x.length = L;
    x.batch = 1 + static_cast<int>(rng.below(3));
    x.data = random_matrix(rng, c0, L * x.batch);
    check_gradients(net, x, 500 + trial);
  }
}

TEST_CASE("forward is pure") {
  const Network net = init_network({LayerSpec::conv(1, 4, 5, 2, 2), LayerSpec::act(Activation::relu),
                                    LayerSpec::dense(4 * 16, 2)},
                                   3);
  Rng rng(1);
  const Tensor x = Tensor::from_rows(random_matrix(rng, 4, 32));
  CHECK(forward(net, x).data == forward(net, x).data);
}

TEST_CASE("mse loss") {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 1, 0;
  b << 0, 0;
  const auto r = mse_loss(a, b);
  CHECK(r.loss == 0.5);
  CHECK(r.grad(0, 0) == 1.0);
  CHECK(r.grad(1, 0) == 0.0);
  const auto same = mse_loss(a, a);
  CHECK(same.loss == 0.0);
  CHECK(same.grad.cwiseAbs().maxCoeff() == 0.0);
  Rng rng(6);
  const Eigen::MatrixXd p = random_matrix(rng, 2, 5), q = random_matrix(rng, 2, 5);
  CHECK(mse_loss(p, q).loss == mse_loss(q, p).loss);
  // batch loss is the mean of per-sample losses
  double acc = 0.0;
  for (int j = 0; j < 5; ++j) acc += mse_loss(p.col(j), q.col(j)).loss / 5.0;
  CHECK(mse_loss(p, q).loss == doctest::Approx(acc).epsilon(1e-15));
  CHECK_THROWS(mse_loss(p, a));
}

TEST_CASE("adam") {
  std::vector<double> x{0.5, -2.0, 3.0};
  std::vector<double> g{0.0, 0.0, 0.0};
  AdamState st;
  const ParamView view{x, g};
  adam_step({&view, 1}, st, 0.1);
  CHECK(st.t == 1);
  CHECK(x == std::vector<double>{0.5, -2.0, 3.0});

  AdamState first;
  std::vector<double> y{1.0, 1.0, 1.0};
  const std::vector<double> gy{3.0, -0.002, 1e-3};
  const ParamView vy{y, gy};
  adam_step({&vy, 1}, first, 0.01);
  for (int i = 0; i < 3; ++i) {
    const double delta = y[i] - 1.0;
    CHECK(std::abs(delta + 0.01 * gy[i] / (std::abs(gy[i]) + 1e-8)) < 1e-12);
  }

  AdamState run;
  std::vector<double> s{1.0}, gs{0.0};
  const ParamView vs{s, gs};
  for (int i = 0; i < 200; ++i) {
    gs[0] = 2.0 * s[0];
    adam_step({&vs, 1}, run, 0.1);
  }
  CHECK(std::abs(s[0]) < 0.05);

  std::vector<double> wrong{1.0, 2.0}, wg{0.0, 0.0};
  const ParamView vw{wrong, wg};
  CHECK_THROWS(adam_step({&vw, 1}, st, 0.1));
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sdp/stbp.hpp"

using namespace sdp;
using testing::error_of;

namespace {

LossFunction linear_loss(std::vector<double> g) {
  return {[g](std::span<const double> a) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s += g[i] * a[i];
            return s;
          },
          [g](std::span<const double>) { return g; }};
}

void check_against_tape(const SdpNetwork& net, const StateVector& s, const std::vector<double>& g,
                        const SurrogateParams& sp) {
  const auto fwd = forward(net, s);
  const auto grads = backward(net, fwd.trace, g, sp);
  const auto ref = oracle::unrolled_gradients(net, s.values, g, sp);
  CHECK(grads.matches(net));
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    for (std::size_t i = 0; i < ref.layer_weights[k].size(); ++i)
      CHECK(std::abs(grads.layers[k].weights.data[i] - ref.layer_weights[k][i]) <= 1e-10);
    for (std::size_t i = 0; i < ref.layer_bias[k].size(); ++i)
      CHECK(std::abs(grads.layers[k].bias[i] - ref.layer_bias[k][i]) <= 1e-10);
  }
  for (std::size_t i = 0; i < ref.decoder_weights.size(); ++i)
    CHECK(std::abs(grads.decoder_weights.data[i] - ref.decoder_weights[i]) <= 1e-10);
  for (std::size_t i = 0; i < ref.decoder_bias.size(); ++i)
    CHECK(std::abs(grads.decoder_bias[i] - ref.decoder_bias[i]) <= 1e-10);
}

}  // namespace

TEST_CASE("surrogate is a strict rectangle") {
  const SurrogateParams p{9.0, 0.4};
  CHECK(surrogate(0.6, 0.5, p) == 9.0);
  CHECK(surrogate(1.0, 0.5, p) == 0.0);
  CHECK(surrogate(0.5 + 0.4, 0.5, p) == 0.0);
  CHECK(surrogate(0.5 - 0.4, 0.5, p) == 0.0);
  CHECK(surrogate(0.5, 0.5, p) == 9.0);
  for (int i = -2000; i <= 2000; ++i) {
    const double v = 0.5 + i * 1e-3;
    const double s = surrogate(v, 0.5, p);
    CHECK((s == 0.0 || s == 9.0));
    CHECK((s != 0.0) == (std::abs(v - 0.5) < 0.4));
  }
}

TEST_CASE("zero upstream gradient gives an all-zero gradient set") {
  std::mt19937_64 rng(3);
  const auto net = oracle::random_tiny_net(rng, 2, 3, {5, 4}, 4);
  const auto s = oracle::random_state(rng, 2);
  const auto fwd = forward(net, s);
  const std::vector<double> zero(3, 0.0);
  const auto g = backward(net, fwd.trace, zero, {});
  CHECK(g.matches(net));
  CHECK(g.l2_norm() == 0.0);
}

TEST_CASE("backward matches the unrolled tape on small nets") {
  std::mt19937_64 rng(21);
  const SurrogateParams sp{9.0, 0.4};
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + rng() % 2;
    std::vector<std::size_t> hidden{2 + rng() % 4};
    if (trial % 3 == 0) hidden.push_back(2 + rng() % 3);
    auto net = oracle::random_tiny_net(rng, m, 2, hidden, 1 + rng() % 5, 0.8);
    const auto s = oracle::random_state(rng, m);
    std::vector<double> g(m + 1);
    for (auto& x : g) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    check_against_tape(net, s, g, sp);
  }
}

TEST_CASE("backward rejects a trace from a different network") {
  std::mt19937_64 rng(5);
  const auto a = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  const auto b = oracle::random_tiny_net(rng, 1, 3, {5}, 3);
  const auto s = oracle::random_state(rng, 1);
  const auto fwd = forward(a, s);
  const std::vector<double> g{1.0, -1.0};
  CHECK(error_of([&] { backward(b, fwd.trace, g, {}); }) == ErrorCode::TraceMismatch);
  auto c = a;
  c.timesteps = 4;
  CHECK(error_of([&] { backward(c, fwd.trace, g, {}); }) == ErrorCode::TraceMismatch);
  const std::vector<double> short_g{1.0};
  CHECK(error_of([&] { backward(a, fwd.trace, short_g, {}); }).has_value());
}

TEST_CASE("silent last layer: decoder weight gradient is zero, bias follows the softmax Jacobian") {
  std::mt19937_64 rng(6);
  auto net = oracle::random_tiny_net(rng, 2, 3, {4}, 3);
  for (auto& b : net.layers[0].bias) b = -5.0;  // nothing can reach threshold
  const auto s = oracle::random_state(rng, 2);
  const auto fwd = forward(net, s);
  REQUIRE(fwd.trace.layers[0].spikes.count() == 0);
  const std::vector<double> g{0.3, -0.7, 1.1};
  const auto grads = backward(net, fwd.trace, g, {});
  for (double x : grads.decoder_weights.data) CHECK(x == 0.0);
  const auto& a = fwd.action.weights;
  double dot = 0.0;
  for (std::size_t i = 0; i < 3; ++i) dot += g[i] * a[i];
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(grads.decoder_bias[j] == doctest::Approx(a[j] * (g[j] - dot)).epsilon(1e-14));
}

TEST_CASE("decoder gradients agree with central differences") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + rng() % 3;
    const auto net = oracle::random_tiny_net(rng, m, 3, {6}, 5);
    const auto s = oracle::random_state(rng, m);
    std::vector<double> g(m + 1);
    for (auto& x : g) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    std::vector<ParamRef> sample;
    for (const auto& r : all_parameters(net))
      if (r.kind == ParamKind::DecoderBias || r.kind == ParamKind::DecoderWeight) sample.push_back(r);
    const auto report = grad_check(net, s, linear_loss(g), 1e-6, sample);
    CHECK(report.entries.size() == sample.size());
    CHECK(report.flagged == 0);
    for (const auto& e : report.entries)
      if (e.param.kind == ParamKind::DecoderBias) CHECK(e.relative_error < 1e-5);
  }
}

TEST_CASE("grad_check reports hidden entries without flagging them") {
  std::mt19937_64 rng(12);
  const auto net = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  const auto s = oracle::random_state(rng, 1);
  const auto params = all_parameters(net);
  const auto report = grad_check(net, s, linear_loss({1.0, -1.0}), 1e-6, params);
  CHECK(report.entries.size() == net.parameter_count());
  bool some_hidden_mismatch = false;
  for (const auto& e : report.entries) {
    if (e.param.kind == ParamKind::LayerWeight || e.param.kind == ParamKind::LayerBias) {
      CHECK_FALSE(e.flagged);
      // spike counts are piecewise constant: a tiny nudge leaves the loss unchanged
      if (e.numeric == 0.0 && e.analytic != 0.0) some_hidden_mismatch = true;
    }
  }
  CHECK(report.flagged == 0);
  (void)some_hidden_mismatch;  // depends on the draw; the point is that it is never flagged

  CHECK(error_of([&] { grad_check(net, s, linear_loss({1.0, -1.0}), 0.0, params); }) ==
        ErrorCode::InvalidArgument);
  CHECK(error_of([&] { grad_check(net, s, linear_loss({1.0, -1.0}), 1e-3, params); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("relative_error") {
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(-1.0, 1.0) == 2.0);
}

TEST_CASE("sgd and adam updates") {
  std::mt19937_64 rng(1);
  auto net = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  const auto before = net;
  auto g = GradientSet::zeros_like(net);

  OptimizerState sgd;
  sgd.rule = OptimizerRule::Sgd;
  sgd.learning_rate = 0.1;
  apply_gradients(net, g, sgd);
  CHECK(net == before);

  net.decoder.bias[0] = 1.0;
  g.decoder_bias[0] = 2.0;
  apply_gradients(net, g, sgd);
  CHECK(net.decoder.bias[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(sgd.step == 2);

  // adam, first step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps) ~ lr * sign(g)
  auto net2 = before;
  OptimizerState adam;
  adam.learning_rate = 1e-3;
  auto g2 = GradientSet::zeros_like(net2);
  g2.decoder_bias[1] = 0.37;
  g2.layers[0].weights.data[3] = -5.0;
  apply_gradients(net2, g2, adam);
  CHECK(net2.decoder.bias[1] - before.decoder.bias[1] ==
        doctest::Approx(-1e-3 * 0.37 / (0.37 + 1e-8)).epsilon(1e-9));
  CHECK(net2.layers[0].weights.data[3] - before.layers[0].weights.data[3] ==
        doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(net2.decoder.bias[0] == before.decoder.bias[0]);
  CHECK(adam.step == 1);
  CHECK(adam.first_moment.matches(net2));

  auto wrong = GradientSet::zeros_like(oracle::random_tiny_net(rng, 2, 3, {4}, 3));
  CHECK(error_of([&] { apply_gradients(net2, wrong, adam); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("one optimizer step with nonzero gradient changes the network") {
  std::mt19937_64 rng(14);
  for (auto rule : {OptimizerRule::Sgd, OptimizerRule::Adam}) {
    auto net = oracle::random_tiny_net(rng, 2, 3, {5}, 3);
    const auto s = oracle::random_state(rng, 2);
    const auto fwd = forward(net, s);
    const auto g = backward(net, fwd.trace, std::vector<double>{1.0, -2.0, 0.5}, {});
    REQUIRE(g.l2_norm() > 0.0);
    const auto before = net;
    OptimizerState opt;
    opt.rule = rule;
    apply_gradients(net, g, opt);
    CHECK_FALSE(net == before);
  }
}

TEST_CASE("gradient clipping") {
  std::mt19937_64 rng(2);
  const auto net = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  auto g = GradientSet::zeros_like(net);
  g.decoder_bias = {3.0, 4.0};
  CHECK(clip_gradients(g, 10.0) == 5.0);
  CHECK(g.decoder_bias[0] == 3.0);
  CHECK(clip_gradients(g, 1.0) == 5.0);
  CHECK(g.l2_norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.decoder_bias[0] == doctest::Approx(0.6).epsilon(1e-15));
  g.decoder_bias = {30.0, 40.0};
  CHECK(clip_gradients(g, 0.0) == 50.0);  // disabled
  CHECK(g.decoder_bias[1] == 40.0);
}

TEST_CASE("gradient set arithmetic") {
  std::mt19937_64 rng(2);
  const auto net = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  auto a = GradientSet::zeros_like(net);
  a.decoder_bias = {1.0, 2.0};
  auto b = a;
  a.add(b);
  CHECK(a.decoder_bias == std::vector<double>{2.0, 4.0});
  a.scale(0.5);
  CHECK(a.decoder_bias == std::vector<double>{1.0, 2.0});
  CHECK(a.all_finite());
  a.decoder_bias[0] = NAN;
  CHECK_FALSE(a.all_finite());
}

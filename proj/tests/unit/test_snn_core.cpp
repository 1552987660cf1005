#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sdp/snn_core.hpp"

using namespace sdp;
using testing::error_of;

namespace {

PopulationCoder single_dim_coder(std::size_t P, double lo, double hi, double sigma = 0.0) {
  return PopulationCoder({FeatureRange{lo, hi, sigma}}, P, 0.01, EncodingMode::Deterministic);
}

std::vector<std::size_t> spike_steps(const SpikeTrain& train, std::size_t neuron) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < train.steps; ++t)
    if (train(t, neuron)) out.push_back(t + 1);  // 1-based, as in the worked example
  return out;
}

}  // namespace

TEST_CASE("population centers are evenly spaced and sigma defaults to the spacing") {
  const auto c = single_dim_coder(5, 0.0, 1.0);
  for (std::size_t k = 0; k < 5; ++k) CHECK(c.center(0, k) == doctest::Approx(0.25 * k));
  CHECK(c.sigma(0) == doctest::Approx(0.25));
  CHECK(c.output_size() == 5);
  CHECK(single_dim_coder(3, 0, 1, 0.7).sigma(0) == 0.7);

  const auto market = market_coder(2, 1, 10, {0.5, 1.5, 0}, {0, 1, 0}, 0.01, EncodingMode::Deterministic);
  CHECK(market.dims() == state_dimension(2));
  CHECK(market.output_size() == state_dimension(2) * 10);
  for (std::size_t d = 0; d < market.dims(); ++d)
    for (std::size_t k = 1; k < 10; ++k) CHECK(market.center(d, k) > market.center(d, k - 1));
}

TEST_CASE("stimulation intensities") {
  const auto c = single_dim_coder(3, 0.0, 1.0);  // centers 0, 0.5, 1; sigma 0.5
  StateVector s{{0.5}};
  auto a = stimulation(s, c);
  CHECK(a[1] == 1.0);
  CHECK(a[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(a[0] == doctest::Approx(0.60653).epsilon(1e-5));

  StateVector far{{1.0 + 10 * 0.5}};  // ten sigmas beyond the top center
  CHECK(stimulation(far, c)[2] < 2e-22);

  StateVector wrong{{0.5, 0.5}};
  CHECK(error_of([&] { stimulation(wrong, c); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("deterministic encoding, hand-simulated") {
  const double full[] = {1.0};
  auto t = encode_deterministic(full, 5, 0.01);
  CHECK(t.count() == 5);

  const double none[] = {0.0};
  CHECK(encode_deterministic(none, 50, 0.01).count() == 0);

  const double half[] = {0.5};
  t = encode_deterministic(half, 4, 0.01);
  CHECK(spike_steps(t, 0) == std::vector<std::size_t>{2, 4});
}

TEST_CASE("deterministic encoding is monotone in intensity (property)") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    double lo = u(rng), hi = u(rng);
    if (lo > hi) std::swap(lo, hi);
    const std::size_t T = 1 + rng() % 20;
    const double a[] = {lo}, b[] = {hi};
    CHECK(encode_deterministic(a, T, 0.01).count() <= encode_deterministic(b, T, 0.01).count());
  }
}

TEST_CASE("probabilistic encoding") {
  Rng rng(99);
  const double ones[] = {1.0, 1.0, 1.0};
  const double zeros[] = {0.0, 0.0};
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng r(seed);
    CHECK(encode_probabilistic(ones, 7, r) == encode_deterministic(ones, 7, 0.01));
    CHECK(encode_probabilistic(zeros, 7, r).count() == 0);
  }
  const double half[] = {0.5};
  const auto t = encode_probabilistic(half, 10000, rng);
  CHECK(static_cast<double>(t.count()) / 10000.0 == doctest::Approx(0.5).epsilon(0.04));

  Rng a(5), b(5);
  const double mix[] = {0.3, 0.7, 0.1};
  CHECK(encode_probabilistic(mix, 20, a) == encode_probabilistic(mix, 20, b));
}

TEST_CASE("lif_step arithmetic") {
  LifLayerParams p;
  p.weights = Matrix<double>(1, 1, 0.3);
  p.bias = {0.0};
  p.d_c = 0.5;
  p.d_v = 0.8;
  p.v_th = 0.5;
  LifLayerState st(1);
  const std::uint8_t in[] = {1};
  auto o = lif_step(p, st, in);
  CHECK(st.current[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(o[0] == 0);

  // v_prev = 0.4 unspiked, fresh current 0.3: v = 0.8 * 0.4 + 0.3 = 0.62 > 0.5
  LifLayerParams q = p;
  q.d_c = 0.0;
  LifLayerState st2(1);
  st2.voltage[0] = 0.4;
  o = lif_step(q, st2, in);
  CHECK(st2.voltage[0] == doctest::Approx(0.62).epsilon(1e-15));
  CHECK(o[0] == 1);
  CHECK(st2.prev_spikes[0] == 1);

  // the reset lands on the following step through the (1 - o_prev) gate
  const std::uint8_t quiet[] = {0};
  lif_step(q, st2, quiet);
  CHECK(st2.voltage[0] == 0.0);

  const std::uint8_t wrong[] = {1, 0};
  CHECK(error_of([&] { lif_step(p, st, wrong); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("lif_step with no input decays geometrically") {
  LifLayerParams p;
  p.weights = Matrix<double>(1, 1, 0.0);
  p.bias = {0.0};
  p.d_v = 0.8;
  p.v_th = 10.0;
  LifLayerState st(1);
  st.voltage[0] = 1.0;
  const std::uint8_t none[] = {0};
  double expected = 1.0;
  for (int i = 0; i < 10; ++i) {
    lif_step(p, st, none);
    expected *= 0.8;
    CHECK(st.voltage[0] == doctest::Approx(expected).epsilon(1e-14));
  }

  // with a bias: the current saturates towards b / (1 - d_c)
  p.bias = {0.1};
  p.d_c = 0.5;
  LifLayerState s2(1);
  double c = 0.0, v = 0.0;
  for (int i = 0; i < 10; ++i) {
    lif_step(p, s2, none);
    c = 0.5 * c + 0.1;
    v = 0.8 * v + c;
    CHECK(s2.current[0] == doctest::Approx(c).epsilon(1e-14));
    CHECK(s2.voltage[0] == doctest::Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("a neuron never above threshold never spikes; forcing it above does") {
  LifLayerParams p;
  p.weights = Matrix<double>(1, 1, 0.1);
  p.bias = {0.0};
  p.d_c = 0.0;
  p.d_v = 0.0;
  p.v_th = 0.5;
  LifLayerState st(1);
  const std::uint8_t in[] = {1};
  for (int i = 0; i < 20; ++i) CHECK(lif_step(p, st, in)[0] == 0);
  st.voltage[0] = 0.0;
  p.bias = {0.45};
  CHECK(lif_step(p, st, in)[0] == 1);
}

TEST_CASE("firing rates and decoding") {
  SpikeTrain t(5, 3);
  for (std::size_t s = 0; s < 5; ++s) t(s, 0) = 1;
  t(0, 2) = t(2, 2) = t(4, 2) = 1;
  const auto r = firing_rates(t);
  CHECK(r == std::vector<double>{1.0, 0.0, 0.6});

  const double equal[] = {2.0, 2.0, 2.0, 2.0};
  for (double a : softmax(equal).weights) CHECK(a == doctest::Approx(0.25).epsilon(1e-15));

  const double two[] = {0.0, std::log(3.0)};
  const auto a = softmax(two);
  CHECK(a.weights[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(a.weights[1] == doctest::Approx(0.75).epsilon(1e-14));

  const double z[] = {0.3, -1.2, 2.0};
  const double shifted[] = {100.3, 98.8, 102.0};
  const auto p = softmax(z), q = softmax(shifted);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.weights[i] == doctest::Approx(q.weights[i]).epsilon(1e-12));

  const double huge[] = {800.0, 0.0};
  CHECK(softmax(huge).weights[0] == 1.0);
  const double bad[] = {0.0, std::nan("")};
  CHECK(error_of([&] { softmax(bad); }) == ErrorCode::NonFiniteLogit);
  const double inf[] = {0.0, INFINITY};
  CHECK(error_of([&] { softmax(inf); }) == ErrorCode::NonFiniteLogit);
}

TEST_CASE("zero-weight network decodes softmax of the decoder bias") {
  std::mt19937_64 rng(2);
  auto net = oracle::random_tiny_net(rng, 2, 3, {4}, 3);
  for (auto& w : net.layers[0].weights.data) w = 0.0;
  for (auto& b : net.layers[0].bias) b = 0.0;
  const auto s = oracle::random_state(rng, 2);
  const auto r = forward(net, s);
  for (double rate : r.trace.rates) CHECK(rate == 0.0);
  CHECK(r.trace.layers[0].spikes.count() == 0);
  const auto expected = softmax(net.decoder.bias);
  CHECK(r.action.weights == expected.weights);
}

TEST_CASE("forward matches the hand-scripted oracle on a fixed tiny net") {
  // m = 1, P = 3, one hidden layer of 4, T = 3
  auto coder = market_coder(1, 1, 3, {0.8, 1.2, 0}, {0, 1, 0}, 0.01, EncodingMode::Deterministic);
  SdpNetwork net;
  net.coder = coder;
  net.timesteps = 3;
  LifLayerParams layer;
  layer.weights = Matrix<double>(4, coder.output_size());
  for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
    layer.weights.data[i] = 0.05 * static_cast<double>((i * 7) % 11) - 0.2;
  layer.bias = {0.1, -0.05, 0.0, 0.2};
  layer.d_c = 0.5;
  layer.d_v = 0.8;
  layer.v_th = 0.5;
  net.layers.push_back(layer);
  net.decoder.weights = Matrix<double>(2, 4);
  net.decoder.weights.data = {0.5, -0.3, 0.2, 1.0, -0.4, 0.6, 0.1, -0.2};
  net.decoder.bias = {0.05, -0.05};

  StateVector s{{1.02, 1.05, 0.97, 0.3, 0.7}};
  const auto ref = oracle::naive_forward(net, s.values);
  const auto got = forward(net, s);
  const auto& tr = got.trace.layers[0];
  std::size_t hidden_spikes = 0;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(tr.spikes(t, j) == ref.layers[0].o[t][j]);
      CHECK(tr.current(t, j) == doctest::Approx(ref.layers[0].c[t][j]).epsilon(1e-13));
      CHECK(tr.voltage(t, j) == doctest::Approx(ref.layers[0].v[t][j]).epsilon(1e-13));
      hidden_spikes += tr.spikes(t, j);
    }
  CHECK(hidden_spikes > 0);  // the fixture actually exercises the reset path
  for (std::size_t i = 0; i < 2; ++i) CHECK(got.action.weights[i] == doctest::Approx(ref.action[i]).epsilon(1e-13));
}

TEST_CASE("forward invariants over random nets (property)") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 3;
    auto net = oracle::random_tiny_net(rng, m, 2 + rng() % 4, {3 + rng() % 5, 2 + rng() % 4}, 1 + rng() % 6);
    const auto s = oracle::random_state(rng, m);
    const auto a = forward(net, s);
    const auto b = forward(net, s);
    CHECK(a.action.weights == b.action.weights);  // pure function
    double sum = 0.0;
    for (double w : a.action.weights) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (double r : a.trace.rates) CHECK((r >= 0.0 && r <= 1.0));
    CHECK(infer(net, s).weights == a.action.weights);

    // replaying the stored spikes through the recurrences reproduces c and v exactly
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      const auto& p = net.layers[k];
      const auto& tr = a.trace.layers[k];
      LifLayerState st(p.outputs());
      for (std::size_t t = 0; t < net.timesteps; ++t) {
        const auto in = k == 0 ? a.trace.input.step(t) : a.trace.layers[k - 1].spikes.step(t);
        const auto o = lif_step(p, st, in);
        for (std::size_t j = 0; j < p.outputs(); ++j) {
          CHECK(st.current[j] == tr.current(t, j));
          CHECK(st.voltage[j] == tr.voltage(t, j));
          CHECK(o[j] == tr.spikes(t, j));
        }
      }
    }
  }
}

TEST_CASE("probabilistic forward needs an rng and is seed-deterministic") {
  std::mt19937_64 rng(4);
  auto net = oracle::random_tiny_net(rng, 2, 3, {5}, 4);
  net.coder = PopulationCoder(net.coder.ranges(), net.coder.population(), net.coder.eps(),
                              EncodingMode::Probabilistic);
  const auto s = oracle::random_state(rng, 2);
  CHECK(error_of([&] { forward(net, s); }) == ErrorCode::InvalidArgument);
  Rng a(10), b(10);
  CHECK(forward(net, s, &a).action.weights == forward(net, s, &b).action.weights);
}

TEST_CASE("validate rejects broken networks") {
  std::mt19937_64 rng(8);
  const auto good = oracle::random_tiny_net(rng, 1, 3, {4}, 3);
  validate(good);
  auto bad = good;
  bad.layers[0].weights = Matrix<double>(4, 7);
  CHECK(error_of([&] { validate(bad); }) == ErrorCode::DimensionMismatch);
  bad = good;
  bad.layers[0].d_v = 1.5;
  CHECK(error_of([&] { validate(bad); }).has_value());
  bad = good;
  bad.layers[0].v_th = 0.0;
  CHECK(error_of([&] { validate(bad); }).has_value());
  bad = good;
  bad.decoder.weights = Matrix<double>(2, 3);
  CHECK(error_of([&] { validate(bad); }) == ErrorCode::DimensionMismatch);
  StateVector wrong{{1.0, 1.0}};
  CHECK(error_of([&] { forward(good, wrong); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("init_network draws weights within the fan-in bound and is seeded") {
  const auto coder = market_coder(2, 1, 4, {0.5, 1.5, 0}, {0, 1, 0}, 0.01, EncodingMode::Deterministic);
  const std::size_t hidden[] = {8, 6};
  const auto a = init_network(coder, hidden, 3, {}, 5, 123);
  const auto b = init_network(coder, hidden, 3, {}, 5, 123);
  const auto c = init_network(coder, hidden, 3, {}, 5, 124);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.parameter_count() == (8 * coder.output_size() + 8) + (6 * 8 + 6) + (3 * 6 + 3));
  const double bound0 = std::sqrt(1.0 / static_cast<double>(coder.output_size()));
  for (double w : a.layers[0].weights.data) CHECK(std::abs(w) <= bound0);
  for (double b0 : a.layers[0].bias) CHECK(b0 == 0.0);
  CHECK(a.layers[1].v_th == 0.5);
  CHECK(a.layers[1].d_c == 0.5);
  CHECK(a.layers[1].d_v == 0.8);
}

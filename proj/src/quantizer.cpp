#include "sdp/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "sdp/detail/propagate.hpp"
#include "sdp/error.hpp"

namespace sdp {

QuantizedLayer rescale_layer(const LifLayerParams& layer, std::int32_t w_max) {
  require(w_max >= 1, ErrorCode::InvalidArgument, "w_max must be >= 1");
  double largest = 0.0;
  for (double w : layer.weights.data) largest = std::max(largest, std::abs(w));
  require(largest > 0.0, ErrorCode::AllZeroWeights, "cannot rescale a layer whose weights are all zero");

  QuantizedLayer q;
  q.w_max = w_max;
  q.ratio = static_cast<double>(w_max) / largest;
  q.d_c = layer.d_c;
  q.d_v = layer.d_v;
  q.weights = Matrix<std::int32_t>(layer.weights.rows, layer.weights.cols);
  for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
    const double scaled = std::round(q.ratio * layer.weights.data[i]);
    q.weights.data[i] = static_cast<std::int32_t>(std::clamp(scaled, -double(w_max), double(w_max)));
  }
  q.bias.resize(layer.bias.size());
  for (std::size_t i = 0; i < layer.bias.size(); ++i)
    q.bias[i] = static_cast<std::int64_t>(std::round(q.ratio * layer.bias[i]));
  q.v_th = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::round(q.ratio * layer.v_th)));
  return q;
}

QuantizedNetwork quantize(const SdpNetwork& net, std::int32_t w_max) {
  validate(net);
  QuantizedNetwork q;
  q.coder = net.coder;
  q.decoder = net.decoder;
  q.timesteps = net.timesteps;
  for (const auto& l : net.layers) q.layers.push_back(rescale_layer(l, w_max));
  return q;
}

namespace {

using IntView = detail::LayerView<std::int32_t, std::int64_t>;

std::vector<IntView> views_of(const QuantizedNetwork& q) {
  require(!q.layers.empty(), ErrorCode::DimensionMismatch, "quantized network has no layers");
  std::vector<IntView> views;
  std::size_t expected_in = q.coder.output_size();
  for (const auto& l : q.layers) {
    require(l.weights.cols == expected_in && l.bias.size() == l.weights.rows,
            ErrorCode::DimensionMismatch, "quantized layers do not chain");
    views.push_back({l.weights.data.data(), l.bias.data(), l.weights.cols, l.weights.rows, l.d_c,
                     l.d_v, static_cast<double>(l.v_th)});
    expected_in = l.weights.rows;
  }
  require(q.decoder.weights.cols == expected_in, ErrorCode::DimensionMismatch,
          "decoder does not match the last quantized layer");
  return views;
}

}  // namespace

ForwardResult forward_quantized(const QuantizedNetwork& qnet, const StateVector& state, Rng* rng) {
  const auto views = views_of(qnet);
  ForwardResult result;
  result.action = detail::run_network<std::int32_t, std::int64_t>(
      qnet.coder, views, qnet.decoder, qnet.timesteps, state, rng, &result.trace);
  return result;
}

Action infer_quantized(const QuantizedNetwork& qnet, const StateVector& state, Rng* rng) {
  const auto views = views_of(qnet);
  return detail::run_network<std::int32_t, std::int64_t>(qnet.coder, views, qnet.decoder,
                                                         qnet.timesteps, state, rng, nullptr);
}

DivergenceReport compare(const SdpNetwork& net, const QuantizedNetwork& qnet,
                         std::span<const StateVector> states) {
  require(net.layers.size() == qnet.layers.size() && net.timesteps == qnet.timesteps &&
              net.coder == qnet.coder,
          ErrorCode::ShapeMismatch, "quantized network was not derived from this network");
  for (std::size_t k = 0; k < net.layers.size(); ++k)
    require(net.layers[k].weights.rows == qnet.layers[k].weights.rows &&
                net.layers[k].weights.cols == qnet.layers[k].weights.cols,
            ErrorCode::ShapeMismatch, "layer shapes differ");

  const std::size_t L = net.layers.size();
  DivergenceReport report;
  report.mean_spike_hamming.assign(L, 0.0);
  report.max_spike_hamming.assign(L, 0);
  for (const auto& state : states) {
    const auto f = forward(net, state);
    const auto q = forward_quantized(qnet, state);
    StateDivergence d;
    for (std::size_t i = 0; i < f.action.weights.size(); ++i)
      d.action_l1 += std::abs(f.action.weights[i] - q.action.weights[i]);
    for (std::size_t k = 0; k < L; ++k) {
      const auto& a = f.trace.layers[k].spikes.bits;
      const auto& b = q.trace.layers[k].spikes.bits;
      std::size_t h = 0;
      for (std::size_t i = 0; i < a.size(); ++i) h += a[i] != b[i] ? 1 : 0;
      d.spike_hamming.push_back(h);
      report.mean_spike_hamming[k] += static_cast<double>(h);
      report.max_spike_hamming[k] = std::max(report.max_spike_hamming[k], h);
    }
    report.mean_action_l1 += d.action_l1;
    report.max_action_l1 = std::max(report.max_action_l1, d.action_l1);
    report.states.push_back(std::move(d));
  }
  if (!states.empty()) {
    const double n = static_cast<double>(states.size());
    report.mean_action_l1 /= n;
    for (double& h : report.mean_spike_hamming) h /= n;
  }
  return report;
}

std::string divergence_json(const DivergenceReport& r) {
  nlohmann::ordered_json j;
  j["states"] = r.states.size();
  j["mean_action_l1"] = r.mean_action_l1;
  j["max_action_l1"] = r.max_action_l1;
  j["mean_spike_hamming"] = r.mean_spike_hamming;
  j["max_spike_hamming"] = r.max_spike_hamming;
  nlohmann::ordered_json per_state = nlohmann::ordered_json::array();
  for (const auto& s : r.states)
    per_state.push_back({{"action_l1", s.action_l1}, {"spike_hamming", s.spike_hamming}});
  j["per_state"] = std::move(per_state);
  return j.dump(2) + "\n";
}

}  // namespace sdp

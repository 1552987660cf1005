#pragma once

// Shared forward kernel for float and integer-weight networks.

#include <cstdint>
#include <span>
#include <vector>

#include "sdp/error.hpp"
#include "sdp/snn_core.hpp"

namespace sdp::detail {

template <typename W, typename B>
struct LayerView {
  const W* weights = nullptr;  // out x in, row-major
  const B* bias = nullptr;
  std::size_t in = 0;
  std::size_t out = 0;
  double d_c = 0.0;
  double d_v = 0.0;
  double v_th = 0.0;
};

/// In place: current, voltage, spikes (o_{t-1} on entry, o_t on exit).
template <typename W, typename B>
void lif_kernel(const LayerView<W, B>& layer, std::span<const std::uint8_t> input,
                std::span<double> current, std::span<double> voltage,
                std::span<std::uint8_t> spikes, std::vector<std::size_t>& active) {
  active.clear();
  for (std::size_t j = 0; j < layer.in; ++j)
    if (input[j]) active.push_back(j);

  for (std::size_t r = 0; r < layer.out; ++r) {
    const W* row = layer.weights + r * layer.in;
    double synaptic = 0.0;
    for (std::size_t j : active) synaptic += static_cast<double>(row[j]);
    const double c = layer.d_c * current[r] + synaptic + static_cast<double>(layer.bias[r]);
    const double gate = 1.0 - static_cast<double>(spikes[r]);
    const double v = layer.d_v * voltage[r] * gate + c;
    current[r] = c;
    voltage[r] = v;
    spikes[r] = v > layer.v_th ? 1 : 0;
  }
}

inline SpikeTrain encode(const PopulationCoder& coder, std::span<const double> intensities,
                         std::size_t timesteps, Rng* rng) {
  if (coder.mode() == EncodingMode::Probabilistic) {
    require(rng != nullptr, ErrorCode::InvalidArgument, "probabilistic encoding needs an rng");
    return encode_probabilistic(intensities, timesteps, *rng);
  }
  return encode_deterministic(intensities, timesteps, coder.eps());
}

template <typename W, typename B>
Action run_network(const PopulationCoder& coder, std::span<const LayerView<W, B>> layers,
                   const DecoderParams& decoder, std::size_t timesteps, const StateVector& state,
                   Rng* rng, ForwardTrace* trace) {
  require(timesteps >= 1, ErrorCode::InvalidArgument, "timesteps must be >= 1");
  std::vector<double> intensities = stimulation(state, coder);
  SpikeTrain input = encode(coder, intensities, timesteps, rng);

  std::vector<std::vector<double>> current, voltage;
  std::vector<std::vector<std::uint8_t>> spikes;
  for (const auto& layer : layers) {
    current.emplace_back(layer.out, 0.0);
    voltage.emplace_back(layer.out, 0.0);
    spikes.emplace_back(layer.out, 0);
  }
  if (trace) {
    trace->layers.clear();
    for (const auto& layer : layers)
      trace->layers.push_back(LayerTrace{Matrix<double>(timesteps, layer.out),
                                         Matrix<double>(timesteps, layer.out),
                                         SpikeTrain(timesteps, layer.out)});
  }

  const std::size_t last = layers.size() - 1;
  std::vector<double> spike_sum(layers[last].out, 0.0);
  std::vector<std::size_t> active;
  active.reserve(input.width);

  for (std::size_t t = 0; t < timesteps; ++t) {
    std::span<const std::uint8_t> presynaptic = input.step(t);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      lif_kernel(layers[k], presynaptic, std::span<double>(current[k]),
                 std::span<double>(voltage[k]), std::span<std::uint8_t>(spikes[k]), active);
      if (trace) {
        auto& lt = trace->layers[k];
        std::copy(current[k].begin(), current[k].end(), lt.current.row(t).begin());
        std::copy(voltage[k].begin(), voltage[k].end(), lt.voltage.row(t).begin());
        std::copy(spikes[k].begin(), spikes[k].end(), lt.spikes.step(t).begin());
      }
      presynaptic = spikes[k];
    }
    for (std::size_t i = 0; i < spike_sum.size(); ++i) spike_sum[i] += spikes[last][i];
  }

  std::vector<double> rates(spike_sum.size());
  for (std::size_t i = 0; i < rates.size(); ++i)
    rates[i] = spike_sum[i] / static_cast<double>(timesteps);
  std::vector<double> logits = decoder_logits(rates, decoder);
  Action action = softmax(logits);

  if (trace) {
    trace->intensities = std::move(intensities);
    trace->input = std::move(input);
    trace->rates = std::move(rates);
    trace->logits = std::move(logits);
    trace->action = action;
  }
  return action;
}

}  // namespace sdp::detail

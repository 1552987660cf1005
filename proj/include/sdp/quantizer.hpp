#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdp/snn_core.hpp"

namespace sdp {

inline constexpr std::int32_t kLoihiWeightMax = 127;

/// Integer-weight LIF layer. Currents and voltages stay real-valued because
/// the decays are fractional.
struct QuantizedLayer {
  Matrix<std::int32_t> weights;  // |w| <= w_max
  std::vector<std::int64_t> bias;
  std::int64_t v_th = 1;
  double ratio = 1.0;  // r = w_max / max|w|
  std::int32_t w_max = kLoihiWeightMax;
  double d_c = 0.5;
  double d_v = 0.8;

  bool operator==(const QuantizedLayer&) const = default;
};

struct QuantizedNetwork {
  PopulationCoder coder;
  std::vector<QuantizedLayer> layers;
  DecoderParams decoder;
  std::size_t timesteps = 5;

  bool operator==(const QuantizedNetwork&) const = default;
};

/// Per-layer rescale: r = w_max / max|w|, integers = round(r * x), threshold
/// floored at 1. Throws AllZeroWeights.
QuantizedLayer rescale_layer(const LifLayerParams& layer, std::int32_t w_max = kLoihiWeightMax);

QuantizedNetwork quantize(const SdpNetwork& net, std::int32_t w_max = kLoihiWeightMax);

ForwardResult forward_quantized(const QuantizedNetwork& qnet, const StateVector& state,
                                Rng* rng = nullptr);
Action infer_quantized(const QuantizedNetwork& qnet, const StateVector& state, Rng* rng = nullptr);

struct StateDivergence {
  double action_l1 = 0.0;
  std::vector<std::size_t> spike_hamming;  // per layer
};

struct DivergenceReport {
  std::vector<StateDivergence> states;
  double mean_action_l1 = 0.0;
  double max_action_l1 = 0.0;
  std::vector<double> mean_spike_hamming;
  std::vector<std::size_t> max_spike_hamming;
};

DivergenceReport compare(const SdpNetwork& net, const QuantizedNetwork& qnet,
                         std::span<const StateVector> states);

std::string divergence_json(const DivergenceReport& report);

}  // namespace sdp

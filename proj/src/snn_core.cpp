#include "sdp/snn_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdp/detail/propagate.hpp"
#include "sdp/error.hpp"

namespace sdp {

PopulationCoder::PopulationCoder(std::vector<FeatureRange> ranges, std::size_t population,
                                 double eps, EncodingMode mode)
    : ranges_(std::move(ranges)), population_(population), eps_(eps), mode_(mode) {
  require(population_ >= 1, ErrorCode::InvalidArgument, "population must be >= 1");
  require(eps_ >= 0.0 && eps_ < 1.0, ErrorCode::InvalidArgument, "encoder eps must be in [0,1)");
  centers_.reserve(ranges_.size() * population_);
  for (const auto& r : ranges_) {
    require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.hi > r.lo, ErrorCode::InvalidArgument,
            "feature range must satisfy lo < hi");
    const double spacing =
        population_ == 1 ? r.hi - r.lo : (r.hi - r.lo) / static_cast<double>(population_ - 1);
    for (std::size_t k = 0; k < population_; ++k) {
      centers_.push_back(population_ == 1 ? 0.5 * (r.lo + r.hi)
                                          : r.lo + spacing * static_cast<double>(k));
    }
    sigmas_.push_back(r.sigma > 0.0 ? r.sigma : spacing);
  }
}

PopulationCoder market_coder(std::size_t assets, std::size_t window, std::size_t population,
                             FeatureRange price_range, FeatureRange weight_range, double eps,
                             EncodingMode mode) {
  std::vector<FeatureRange> ranges(3 * assets * window, price_range);
  ranges.insert(ranges.end(), assets + 1, weight_range);
  return PopulationCoder(std::move(ranges), population, eps, mode);
}

std::size_t SdpNetwork::parameter_count() const noexcept {
  std::size_t n = decoder.weights.data.size() + decoder.bias.size();
  for (const auto& l : layers) n += l.weights.data.size() + l.bias.size();
  return n;
}

void validate(const SdpNetwork& net) {
  require(!net.layers.empty(), ErrorCode::DimensionMismatch, "network has no LIF layers");
  require(net.timesteps >= 1, ErrorCode::InvalidArgument, "timesteps must be >= 1");
  std::size_t expected_in = net.coder.output_size();
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    const std::string where = "layer " + std::to_string(k + 1);
    require(l.inputs() == expected_in, ErrorCode::DimensionMismatch,
            where + " expects " + std::to_string(l.inputs()) + " inputs, chain provides " +
                std::to_string(expected_in));
    require(l.weights.data.size() == l.inputs() * l.outputs() && l.bias.size() == l.outputs(),
            ErrorCode::DimensionMismatch, where + " has inconsistent parameter shapes");
    require(l.d_c >= 0.0 && l.d_c <= 1.0 && l.d_v >= 0.0 && l.d_v <= 1.0,
            ErrorCode::InvalidArgument, where + " decay outside [0,1]");
    require(l.v_th > 0.0, ErrorCode::InvalidArgument, where + " threshold must be positive");
    const auto finite = [](double x) { return std::isfinite(x); };
    require(std::all_of(l.weights.data.begin(), l.weights.data.end(), finite) &&
                std::all_of(l.bias.begin(), l.bias.end(), finite),
            ErrorCode::InvalidArgument, where + " has non-finite parameters");
    expected_in = l.outputs();
  }
  require(net.decoder.weights.cols == expected_in && net.decoder.bias.size() == net.actions() &&
              net.actions() >= 1,
          ErrorCode::DimensionMismatch, "decoder does not match the last layer");
}

std::size_t SpikeTrain::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits) n += b;
  return n;
}

std::vector<double> stimulation(const StateVector& state, const PopulationCoder& coder) {
  require(state.values.size() == coder.dims(), ErrorCode::DimensionMismatch,
          "state has dimension " + std::to_string(state.values.size()) + ", coder expects " +
              std::to_string(coder.dims()));
  const std::size_t P = coder.population();
  std::vector<double> out(coder.output_size());
  for (std::size_t d = 0; d < coder.dims(); ++d) {
    const double s = state.values[d];
    const double sigma = coder.sigma(d);
    for (std::size_t k = 0; k < P; ++k) {
      const double z = (s - coder.center(d, k)) / sigma;
      out[d * P + k] = std::exp(-0.5 * z * z);
    }
  }
  return out;
}

SpikeTrain encode_deterministic(std::span<const double> intensities, std::size_t timesteps,
                                double eps) {
  const double threshold = 1.0 - eps;
  SpikeTrain train(timesteps, intensities.size());
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    double v = 0.0;
    for (std::size_t t = 0; t < timesteps; ++t) {
      v += intensities[i];
      if (v > threshold) {
        train(t, i) = 1;
        v -= threshold;
      }
    }
  }
  return train;
}

SpikeTrain encode_probabilistic(std::span<const double> intensities, std::size_t timesteps,
                                Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  SpikeTrain train(timesteps, intensities.size());
  for (std::size_t t = 0; t < timesteps; ++t)
    for (std::size_t i = 0; i < intensities.size(); ++i)
      train(t, i) = uniform(rng) < intensities[i] ? 1 : 0;
  return train;
}

std::vector<std::uint8_t> lif_step(const LifLayerParams& params, LifLayerState& state,
                                   std::span<const std::uint8_t> input) {
  const std::size_t out = params.outputs();
  require(input.size() == params.inputs(), ErrorCode::DimensionMismatch,
          "lif_step input width mismatch");
  require(state.current.size() == out && state.voltage.size() == out &&
              state.prev_spikes.size() == out && params.bias.size() == out,
          ErrorCode::DimensionMismatch, "lif_step state width mismatch");
  const detail::LayerView<double, double> view{params.weights.data.data(), params.bias.data(),
                                               params.inputs(), out, params.d_c, params.d_v,
                                               params.v_th};
  std::vector<std::size_t> active;
  detail::lif_kernel(view, input, std::span<double>(state.current),
                     std::span<double>(state.voltage), std::span<std::uint8_t>(state.prev_spikes),
                     active);
  return state.prev_spikes;
}

std::vector<double> firing_rates(const SpikeTrain& train) {
  require(train.steps >= 1, ErrorCode::InvalidArgument, "firing rates need T >= 1");
  std::vector<double> sums(train.width, 0.0);
  for (std::size_t t = 0; t < train.steps; ++t)
    for (std::size_t i = 0; i < train.width; ++i) sums[i] += train(t, i);
  for (double& s : sums) s /= static_cast<double>(train.steps);
  return sums;
}

std::vector<double> decoder_logits(std::span<const double> rates, const DecoderParams& decoder) {
  require(rates.size() == decoder.weights.cols && decoder.bias.size() == decoder.actions(),
          ErrorCode::DimensionMismatch, "decoder shape does not match firing rates");
  std::vector<double> z(decoder.actions());
  for (std::size_t i = 0; i < z.size(); ++i) {
    double acc = 0.0;
    const auto w = decoder.weights.row(i);
    for (std::size_t j = 0; j < rates.size(); ++j) acc += w[j] * rates[j];
    z[i] = acc + decoder.bias[i];
  }
  return z;
}

Action softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::DimensionMismatch, "softmax of an empty vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    require(std::isfinite(z), ErrorCode::NonFiniteLogit, "decoder produced a non-finite logit");
    top = std::max(top, z);
  }
  Action a;
  a.weights.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    a.weights[i] = std::exp(logits[i] - top);
    total += a.weights[i];
  }
  for (double& w : a.weights) w /= total;
  return a;
}

Action decode(std::span<const double> rates, const DecoderParams& decoder) {
  return softmax(decoder_logits(rates, decoder));
}

namespace {

std::vector<detail::LayerView<double, double>> views_of(const SdpNetwork& net) {
  std::vector<detail::LayerView<double, double>> views;
  views.reserve(net.layers.size());
  for (const auto& l : net.layers)
    views.push_back({l.weights.data.data(), l.bias.data(), l.inputs(), l.outputs(), l.d_c, l.d_v,
                     l.v_th});
  return views;
}

}  // namespace

ForwardResult forward(const SdpNetwork& net, const StateVector& state, Rng* rng) {
  validate(net);
  const auto views = views_of(net);
  ForwardResult result;
  result.action = detail::run_network<double, double>(net.coder, views, net.decoder,
                                                      net.timesteps, state, rng, &result.trace);
  return result;
}

Action infer(const SdpNetwork& net, const StateVector& state, Rng* rng) {
  const auto views = views_of(net);
  require(!views.empty() && views.front().in == net.coder.output_size(),
          ErrorCode::DimensionMismatch, "network does not match its coder");
  return detail::run_network<double, double>(net.coder, views, net.decoder, net.timesteps, state,
                                             rng, nullptr);
}

SdpNetwork init_network(PopulationCoder coder, std::span<const std::size_t> hidden,
                        std::size_t actions, LifConstants constants, std::size_t timesteps,
                        std::uint64_t seed) {
  require(!hidden.empty(), ErrorCode::InvalidArgument, "need at least one hidden layer");
  require(actions >= 1, ErrorCode::InvalidArgument, "need at least one action");
  SdpNetwork net;
  net.timesteps = timesteps;
  net.seed = seed;
  Rng rng(seed);
  std::size_t fan_in = coder.output_size();
  net.coder = std::move(coder);
  for (std::size_t width : hidden) {
    require(width >= 1, ErrorCode::InvalidArgument, "hidden layers must be non-empty");
    LifLayerParams layer;
    layer.weights = Matrix<double>(width, fan_in);
    layer.bias.assign(width, 0.0);
    layer.d_c = constants.d_c;
    layer.d_v = constants.d_v;
    layer.v_th = constants.v_th;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (double& w : layer.weights.data) w = uniform(rng);
    net.layers.push_back(std::move(layer));
    fan_in = width;
  }
  net.decoder.weights = Matrix<double>(actions, fan_in);
  net.decoder.bias.assign(actions, 0.0);
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (double& w : net.decoder.weights.data) w = uniform(rng);
  validate(net);
  return net;
}

}  // namespace sdp

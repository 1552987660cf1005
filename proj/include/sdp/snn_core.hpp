#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sdp/market_data.hpp"

namespace sdp {

/// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

using Rng = std::mt19937_64;

enum class EncodingMode { Deterministic, Probabilistic };

/// Value range covered by one state dimension's population. sigma <= 0 means
/// "use the spacing between neighbouring centers".
struct FeatureRange {
  double lo = 0.0;
  double hi = 1.0;
  double sigma = 0.0;

  bool operator==(const FeatureRange&) const = default;
};

/// Gaussian population encoder: P neurons per state dimension with evenly
/// spaced centers over the dimension's range.
class PopulationCoder {
 public:
  PopulationCoder() = default;
  PopulationCoder(std::vector<FeatureRange> ranges, std::size_t population = 10,
                  double eps = 0.01, EncodingMode mode = EncodingMode::Deterministic);

  std::size_t dims() const noexcept { return ranges_.size(); }
  std::size_t population() const noexcept { return population_; }
  std::size_t output_size() const noexcept { return ranges_.size() * population_; }
  double eps() const noexcept { return eps_; }
  EncodingMode mode() const noexcept { return mode_; }
  const std::vector<FeatureRange>& ranges() const noexcept { return ranges_; }

  double center(std::size_t dim, std::size_t k) const { return centers_[dim * population_ + k]; }
  double sigma(std::size_t dim) const { return sigmas_[dim]; }

  bool operator==(const PopulationCoder&) const = default;

 private:
  std::vector<FeatureRange> ranges_;
  std::size_t population_ = 0;
  double eps_ = 0.01;
  EncodingMode mode_ = EncodingMode::Deterministic;
  std::vector<double> centers_;
  std::vector<double> sigmas_;
};

/// Coder for the market state layout: 3*m*window price-ratio dims followed by
/// m+1 weight dims.
PopulationCoder market_coder(std::size_t assets, std::size_t window, std::size_t population,
                             FeatureRange price_range, FeatureRange weight_range, double eps,
                             EncodingMode mode);

struct LifLayerParams {
  Matrix<double> weights;  // out x in
  std::vector<double> bias;
  double d_c = 0.5;
  double d_v = 0.8;
  double v_th = 0.5;

  std::size_t inputs() const noexcept { return weights.cols; }
  std::size_t outputs() const noexcept { return weights.rows; }

  bool operator==(const LifLayerParams&) const = default;
};

struct LifLayerState {
  std::vector<double> current;
  std::vector<double> voltage;
  std::vector<std::uint8_t> prev_spikes;

  explicit LifLayerState(std::size_t n = 0) : current(n, 0.0), voltage(n, 0.0), prev_spikes(n, 0) {}
};

/// Logit i = weights.row(i) . rates + bias[i]; one row per action.
struct DecoderParams {
  Matrix<double> weights;  // N x hidden
  std::vector<double> bias;

  std::size_t actions() const noexcept { return weights.rows; }

  bool operator==(const DecoderParams&) const = default;
};

struct SdpNetwork {
  PopulationCoder coder;
  std::vector<LifLayerParams> layers;
  DecoderParams decoder;
  std::size_t timesteps = 5;
  std::uint64_t seed = 0;

  std::size_t actions() const noexcept { return decoder.actions(); }
  std::size_t parameter_count() const noexcept;

  bool operator==(const SdpNetwork&) const = default;
};

/// Throws DimensionMismatch / InvalidArgument when layers do not chain or
/// constants are out of range.
void validate(const SdpNetwork& net);

/// T x n binary matrix.
struct SpikeTrain {
  std::size_t steps = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  SpikeTrain() = default;
  SpikeTrain(std::size_t t, std::size_t n) : steps(t), width(n), bits(t * n, 0) {}

  std::uint8_t operator()(std::size_t t, std::size_t i) const { return bits[t * width + i]; }
  std::uint8_t& operator()(std::size_t t, std::size_t i) { return bits[t * width + i]; }
  std::span<const std::uint8_t> step(std::size_t t) const { return {bits.data() + t * width, width}; }
  std::span<std::uint8_t> step(std::size_t t) { return {bits.data() + t * width, width}; }
  std::size_t count() const noexcept;

  bool operator==(const SpikeTrain&) const = default;
};

struct LayerTrace {
  Matrix<double> current;  // T x out
  Matrix<double> voltage;  // T x out
  SpikeTrain spikes;       // T x out
};

struct Action {
  std::vector<double> weights;
};

/// Everything the reverse pass needs from one forward call.
struct ForwardTrace {
  std::vector<double> intensities;
  SpikeTrain input;
  std::vector<LayerTrace> layers;
  std::vector<double> rates;
  std::vector<double> logits;
  Action action;
};

struct ForwardResult {
  Action action;
  ForwardTrace trace;
};

std::vector<double> stimulation(const StateVector& state, const PopulationCoder& coder);

SpikeTrain encode_deterministic(std::span<const double> intensities, std::size_t timesteps,
                                double eps);
SpikeTrain encode_probabilistic(std::span<const double> intensities, std::size_t timesteps,
                                Rng& rng);

/// One timestep of the current/voltage LIF layer. The reset from a spike is
/// applied through the (1 - o_prev) gate on the following step.
std::vector<std::uint8_t> lif_step(const LifLayerParams& params, LifLayerState& state,
                                   std::span<const std::uint8_t> input);

std::vector<double> firing_rates(const SpikeTrain& train);

std::vector<double> decoder_logits(std::span<const double> rates, const DecoderParams& decoder);

/// Max-shifted softmax. Throws NonFiniteLogit.
Action softmax(std::span<const double> logits);

Action decode(std::span<const double> rates, const DecoderParams& decoder);

/// Encode, propagate T timesteps through every layer from a zero state, decode.
/// `rng` is only consulted in probabilistic mode, where it is required.
ForwardResult forward(const SdpNetwork& net, const StateVector& state, Rng* rng = nullptr);

/// forward() without recording a trace.
Action infer(const SdpNetwork& net, const StateVector& state, Rng* rng = nullptr);

struct LifConstants {
  double v_th = 0.5;
  double d_c = 0.5;
  double d_v = 0.8;
};

/// Weights drawn uniformly from [-sqrt(1/fan_in), sqrt(1/fan_in)]; biases zero.
SdpNetwork init_network(PopulationCoder coder, std::span<const std::size_t> hidden,
                        std::size_t actions, LifConstants constants, std::size_t timesteps,
                        std::uint64_t seed);

}  // namespace sdp

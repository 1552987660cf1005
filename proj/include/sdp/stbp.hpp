#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdp/snn_core.hpp"

namespace sdp {

/// Rectangular pseudo-derivative of the spike threshold.
struct SurrogateParams {
  double amplitude = 9.0;
  double window = 0.4;
};

/// dO/dV substitute: amplitude when |v - v_th| < window, zero otherwise.
inline double surrogate(double v, double v_th, const SurrogateParams& p) noexcept {
  return std::abs(v - v_th) < p.window ? p.amplitude : 0.0;
}

struct LayerGradients {
  Matrix<double> weights;
  std::vector<double> bias;
};

/// Gradients shaped exactly like an SdpNetwork's trainable parameters.
struct GradientSet {
  std::vector<LayerGradients> layers;
  Matrix<double> decoder_weights;
  std::vector<double> decoder_bias;

  static GradientSet zeros_like(const SdpNetwork& net);

  bool matches(const SdpNetwork& net) const noexcept;
  void add(const GradientSet& other);
  void scale(double factor);
  double l2_norm() const;
  bool all_finite() const;
};

/// Reverse pass over a recorded trace. The threshold derivative is replaced by
/// surrogate(v); every other edge of the unrolled graph is differentiated
/// exactly, including the reset gate and the current/voltage recurrences.
GradientSet backward(const SdpNetwork& net, const ForwardTrace& trace,
                     std::span<const double> dloss_daction, const SurrogateParams& surrogate);

/// Rescales `grads` in place to at most `max_norm`. Returns the norm before
/// clipping. A non-positive max_norm disables clipping.
double clip_gradients(GradientSet& grads, double max_norm);

enum class OptimizerRule { Sgd, Adam };

struct OptimizerState {
  OptimizerRule rule = OptimizerRule::Adam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  GradientSet first_moment;   // empty until the first Adam step
  GradientSet second_moment;
};

void apply_gradients(SdpNetwork& net, const GradientSet& grads, OptimizerState& opt);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

enum class ParamKind { LayerWeight, LayerBias, DecoderWeight, DecoderBias };

struct ParamRef {
  ParamKind kind = ParamKind::DecoderBias;
  std::size_t layer = 0;  // ignored for decoder parameters
  std::size_t index = 0;  // flat row-major index
};

double& parameter(SdpNetwork& net, const ParamRef& ref);
double gradient(const GradientSet& grads, const ParamRef& ref);
std::vector<ParamRef> all_parameters(const SdpNetwork& net);

struct LossFunction {
  std::function<double(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct GradCheckEntry {
  ParamRef param;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  bool flagged = false;  // decoder-path entries above tolerance only
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t flagged = 0;
  double max_decoder_error = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// |a - n| / max(|a|, |n|), zero when both vanish.
double relative_error(double analytic, double numeric) noexcept;

/// Central differences per sampled parameter against backward(). Hidden-layer
/// entries are reported but never flagged since the surrogate is not the true
/// derivative of the spike count.
GradCheckReport grad_check(const SdpNetwork& net, const StateVector& state,
                           const LossFunction& loss, double h, std::span<const ParamRef> sample,
                           const SurrogateParams& surrogate = {});

}  // namespace sdp

#include "sdp/stbp.hpp"

#include <algorithm>
#include <cmath>

#include "sdp/error.hpp"

namespace sdp {

GradientSet GradientSet::zeros_like(const SdpNetwork& net) {
  GradientSet g;
  for (const auto& l : net.layers)
    g.layers.push_back({Matrix<double>(l.outputs(), l.inputs()),
                        std::vector<double>(l.bias.size(), 0.0)});
  g.decoder_weights = Matrix<double>(net.decoder.weights.rows, net.decoder.weights.cols);
  g.decoder_bias.assign(net.decoder.bias.size(), 0.0);
  return g;
}

bool GradientSet::matches(const SdpNetwork& net) const noexcept {
  if (layers.size() != net.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& g = layers[k];
    const auto& p = net.layers[k];
    if (g.weights.rows != p.weights.rows || g.weights.cols != p.weights.cols ||
        g.weights.data.size() != p.weights.data.size() || g.bias.size() != p.bias.size())
      return false;
  }
  return decoder_weights.rows == net.decoder.weights.rows &&
         decoder_weights.cols == net.decoder.weights.cols &&
         decoder_weights.data.size() == net.decoder.weights.data.size() &&
         decoder_bias.size() == net.decoder.bias.size();
}

namespace {

template <typename F>
void for_each_pair(GradientSet& a, const GradientSet& b, F&& f) {
  require(a.layers.size() == b.layers.size() &&
              a.decoder_weights.data.size() == b.decoder_weights.data.size() &&
              a.decoder_bias.size() == b.decoder_bias.size(),
          ErrorCode::ShapeMismatch, "gradient sets differ in shape");
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    auto& x = a.layers[k];
    const auto& y = b.layers[k];
    require(x.weights.data.size() == y.weights.data.size() && x.bias.size() == y.bias.size(),
            ErrorCode::ShapeMismatch, "gradient layers differ in shape");
    for (std::size_t i = 0; i < x.weights.data.size(); ++i) f(x.weights.data[i], y.weights.data[i]);
    for (std::size_t i = 0; i < x.bias.size(); ++i) f(x.bias[i], y.bias[i]);
  }
  for (std::size_t i = 0; i < a.decoder_weights.data.size(); ++i)
    f(a.decoder_weights.data[i], b.decoder_weights.data[i]);
  for (std::size_t i = 0; i < a.decoder_bias.size(); ++i) f(a.decoder_bias[i], b.decoder_bias[i]);
}

template <typename F>
void for_each_value(const GradientSet& g, F&& f) {
  for (const auto& l : g.layers) {
    for (double x : l.weights.data) f(x);
    for (double x : l.bias) f(x);
  }
  for (double x : g.decoder_weights.data) f(x);
  for (double x : g.decoder_bias) f(x);
}

template <typename F>
void for_each_value(GradientSet& g, F&& f) {
  for (auto& l : g.layers) {
    for (double& x : l.weights.data) f(x);
    for (double& x : l.bias) f(x);
  }
  for (double& x : g.decoder_weights.data) f(x);
  for (double& x : g.decoder_bias) f(x);
}

// Visits (parameter, gradient) pairs in a fixed order.
template <typename F>
void for_each_param(SdpNetwork& net, const GradientSet& g, F&& f) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& p = net.layers[k];
    for (std::size_t i = 0; i < p.weights.data.size(); ++i) f(p.weights.data[i], g.layers[k].weights.data[i]);
    for (std::size_t i = 0; i < p.bias.size(); ++i) f(p.bias[i], g.layers[k].bias[i]);
  }
  for (std::size_t i = 0; i < net.decoder.weights.data.size(); ++i)
    f(net.decoder.weights.data[i], g.decoder_weights.data[i]);
  for (std::size_t i = 0; i < net.decoder.bias.size(); ++i) f(net.decoder.bias[i], g.decoder_bias[i]);
}

}  // namespace

void GradientSet::add(const GradientSet& other) {
  for_each_pair(*this, other, [](double& x, double y) { x += y; });
}

void GradientSet::scale(double factor) {
  for_each_value(*this, [factor](double& x) { x *= factor; });
}

double GradientSet::l2_norm() const {
  double sum = 0.0;
  for_each_value(*this, [&sum](double x) { sum += x * x; });
  return std::sqrt(sum);
}

bool GradientSet::all_finite() const {
  bool ok = true;
  for_each_value(*this, [&ok](double x) { ok = ok && std::isfinite(x); });
  return ok;
}

namespace {

void check_trace(const SdpNetwork& net, const ForwardTrace& trace) {
  const std::size_t T = net.timesteps;
  bool ok = trace.layers.size() == net.layers.size() && trace.input.steps == T &&
            trace.input.width == net.coder.output_size() &&
            trace.rates.size() == net.decoder.weights.cols &&
            trace.action.weights.size() == net.actions();
  for (std::size_t k = 0; ok && k < net.layers.size(); ++k) {
    const auto& lt = trace.layers[k];
    const std::size_t n = net.layers[k].outputs();
    ok = lt.current.rows == T && lt.current.cols == n && lt.voltage.rows == T &&
         lt.voltage.cols == n && lt.spikes.steps == T && lt.spikes.width == n;
  }
  require(ok, ErrorCode::TraceMismatch, "trace shapes do not match the network");
}

}  // namespace

GradientSet backward(const SdpNetwork& net, const ForwardTrace& trace,
                     std::span<const double> dloss_daction, const SurrogateParams& surrogate_params) {
  check_trace(net, trace);
  require(dloss_daction.size() == net.actions(), ErrorCode::DimensionMismatch,
          "loss gradient length must equal the action count");

  const std::size_t T = net.timesteps;
  const std::size_t L = net.layers.size();
  const auto& a = trace.action.weights;
  GradientSet grads = GradientSet::zeros_like(net);

  // Softmax Jacobian: dz_j = a_j * (g_j - sum_i g_i a_i), written as
  // a_j * sum_i a_i (g_j - g_i) so a constant g gives exactly zero.
  std::vector<double> dlogits(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    double centred = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) centred += a[i] * (dloss_daction[j] - dloss_daction[i]);
    dlogits[j] = a[j] * centred;
  }

  const std::size_t hidden = net.decoder.weights.cols;
  std::vector<double> drates(hidden, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    grads.decoder_bias[i] = dlogits[i];
    const auto w = net.decoder.weights.row(i);
    auto gw = grads.decoder_weights.row(i);
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] = dlogits[i] * trace.rates[j];
      drates[j] += w[j] * dlogits[i];
    }
  }

  // dL/do^{(t)(k)}, accumulated from the layer above, the rate readout and
  // the next step's reset gate.
  std::vector<Matrix<double>> dspikes;
  for (const auto& l : net.layers) dspikes.emplace_back(T, l.outputs());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < hidden; ++j)
      dspikes[L - 1](t, j) = drates[j] / static_cast<double>(T);

  // dL/dv and dL/dc at step t+1, per layer.
  std::vector<std::vector<double>> dv_next, dc_next;
  for (const auto& l : net.layers) {
    dv_next.emplace_back(l.outputs(), 0.0);
    dc_next.emplace_back(l.outputs(), 0.0);
  }

  for (std::size_t step = T; step-- > 0;) {
    const bool has_next = step + 1 < T;
    for (std::size_t k = L; k-- > 0;) {
      const auto& layer = net.layers[k];
      const auto& lt = trace.layers[k];
      const auto presynaptic = k == 0 ? trace.input.step(step) : trace.layers[k - 1].spikes.step(step);
      auto& gl = grads.layers[k];
      const std::size_t n_in = layer.inputs();

      for (std::size_t r = 0; r < layer.outputs(); ++r) {
        const double v = lt.voltage(step, r);
        const double o = lt.spikes(step, r);
        double dspike = dspikes[k](step, r);
        double dv = 0.0;
        double dc = 0.0;
        if (has_next) {
          // v_{t+1} = d_v * v_t * (1 - o_t) + c_{t+1}
          dspike += dv_next[k][r] * (-layer.d_v * v);
          dv = dv_next[k][r] * layer.d_v * (1.0 - o);
          dc = dc_next[k][r] * layer.d_c;
        }
        dv += dspike * surrogate(v, layer.v_th, surrogate_params);
        dc += dv;
        dv_next[k][r] = dv;
        dc_next[k][r] = dc;

        if (dc == 0.0) continue;
        gl.bias[r] += dc;
        auto gw = gl.weights.row(r);
        for (std::size_t j = 0; j < n_in; ++j)
          if (presynaptic[j]) gw[j] += dc;
        if (k > 0) {
          const auto w = layer.weights.row(r);
          auto below = dspikes[k - 1].row(step);
          for (std::size_t j = 0; j < n_in; ++j) below[j] += w[j] * dc;
        }
      }
    }
  }
  return grads;
}

double clip_gradients(GradientSet& grads, double max_norm) {
  const double norm = grads.l2_norm();
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

void apply_gradients(SdpNetwork& net, const GradientSet& grads, OptimizerState& opt) {
  require(grads.matches(net), ErrorCode::ShapeMismatch, "gradient shapes do not match network");
  require(opt.learning_rate >= 0.0, ErrorCode::InvalidArgument, "learning rate must be >= 0");
  ++opt.step;
  const double lr = opt.learning_rate;

  if (opt.rule == OptimizerRule::Sgd) {
    for_each_param(net, grads, [lr](double& p, double g) { p -= lr * g; });
    return;
  }

  if (!opt.first_moment.matches(net)) opt.first_moment = GradientSet::zeros_like(net);
  if (!opt.second_moment.matches(net)) opt.second_moment = GradientSet::zeros_like(net);

  const double b1 = opt.beta1;
  const double b2 = opt.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));

  // Flatten moments in the same order as for_each_param.
  std::vector<double*> m, v;
  for_each_value(opt.first_moment, [&m](double& x) { m.push_back(&x); });
  for_each_value(opt.second_moment, [&v](double& x) { v.push_back(&x); });
  std::size_t i = 0;
  for_each_param(net, grads, [&](double& p, double g) {
    double& mi = *m[i];
    double& vi = *v[i];
    ++i;
    mi = b1 * mi + (1.0 - b1) * g;
    vi = b2 * vi + (1.0 - b2) * g * g;
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    p -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  });
}

// ---------------------------------------------------------------------------

double& parameter(SdpNetwork& net, const ParamRef& ref) {
  switch (ref.kind) {
    case ParamKind::LayerWeight:
      return net.layers.at(ref.layer).weights.data.at(ref.index);
    case ParamKind::LayerBias:
      return net.layers.at(ref.layer).bias.at(ref.index);
    case ParamKind::DecoderWeight:
      return net.decoder.weights.data.at(ref.index);
    case ParamKind::DecoderBias:
      return net.decoder.bias.at(ref.index);
  }
  fail(ErrorCode::InvalidArgument, "unknown parameter kind");
}

double gradient(const GradientSet& g, const ParamRef& ref) {
  switch (ref.kind) {
    case ParamKind::LayerWeight: return g.layers.at(ref.layer).weights.data.at(ref.index);
    case ParamKind::LayerBias: return g.layers.at(ref.layer).bias.at(ref.index);
    case ParamKind::DecoderWeight: return g.decoder_weights.data.at(ref.index);
    case ParamKind::DecoderBias: return g.decoder_bias.at(ref.index);
  }
  fail(ErrorCode::InvalidArgument, "unknown parameter kind");
}

std::vector<ParamRef> all_parameters(const SdpNetwork& net) {
  std::vector<ParamRef> refs;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    for (std::size_t i = 0; i < net.layers[k].weights.data.size(); ++i)
      refs.push_back({ParamKind::LayerWeight, k, i});
    for (std::size_t i = 0; i < net.layers[k].bias.size(); ++i)
      refs.push_back({ParamKind::LayerBias, k, i});
  }
  for (std::size_t i = 0; i < net.decoder.weights.data.size(); ++i)
    refs.push_back({ParamKind::DecoderWeight, 0, i});
  for (std::size_t i = 0; i < net.decoder.bias.size(); ++i)
    refs.push_back({ParamKind::DecoderBias, 0, i});
  return refs;
}

double relative_error(double analytic, double numeric) noexcept {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

GradCheckReport grad_check(const SdpNetwork& net, const StateVector& state,
                           const LossFunction& loss, double h, std::span<const ParamRef> sample,
                           const SurrogateParams& surrogate_params) {
  require(h >= 1e-8 && h <= 1e-4, ErrorCode::InvalidArgument, "grad_check step must be in [1e-8, 1e-4]");
  require(net.coder.mode() == EncodingMode::Deterministic, ErrorCode::InvalidArgument,
          "grad_check requires deterministic encoding");
  require(static_cast<bool>(loss.value) && static_cast<bool>(loss.gradient),
          ErrorCode::InvalidArgument, "loss needs value and gradient");

  const auto base = forward(net, state);
  const auto dloss = loss.gradient(base.action.weights);
  const GradientSet grads = backward(net, base.trace, dloss, surrogate_params);

  GradCheckReport report;
  SdpNetwork probe = net;
  for (const ParamRef& ref : sample) {
    double& p = parameter(probe, ref);
    const double original = p;
    p = original + h;
    const double up = loss.value(infer(probe, state).weights);
    p = original - h;
    const double down = loss.value(infer(probe, state).weights);
    p = original;

    GradCheckEntry e;
    e.param = ref;
    e.analytic = gradient(grads, ref);
    e.numeric = (up - down) / (2.0 * h);
    e.relative_error = relative_error(e.analytic, e.numeric);
    const bool decoder_path = ref.kind == ParamKind::DecoderWeight || ref.kind == ParamKind::DecoderBias;
    if (decoder_path) {
      e.flagged = e.relative_error > kGradCheckTolerance;
      report.max_decoder_error = std::max(report.max_decoder_error, e.relative_error);
    }
    report.flagged += e.flagged ? 1 : 0;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace sdp

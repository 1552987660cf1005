#include "sdp/portfolio_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "sdp/error.hpp"

namespace sdp {

PortfolioState PortfolioState::initial(std::size_t assets) {
  PortfolioState ps;
  ps.value = 1.0;
  ps.weights.assign(assets + 1, 0.0);
  ps.weights[0] = 1.0;
  return ps;
}

void validate(const RewardConfig& cfg) {
  require(cfg.commission >= 0.0 && cfg.commission <= 0.05, ErrorCode::InvalidArgument,
          "commission must be in [0, 0.05]");
  require(std::isfinite(cfg.risk_free), ErrorCode::InvalidArgument, "risk-free rate must be finite");
}

void validate(const TrainConfig& cfg) {
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(cfg.episode_length >= 2, ErrorCode::InvalidArgument, "episode_length must be >= 2");
  require(cfg.window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
  require(cfg.surrogate.amplitude > 0.0 && cfg.surrogate.window > 0.0, ErrorCode::InvalidArgument,
          "surrogate parameters must be positive");
  require(cfg.threads >= 1, ErrorCode::InvalidArgument, "threads must be >= 1");
}

std::vector<double> drifted_weights(std::span<const double> w, const PriceRelativeVector& y) {
  require(w.size() == y.y.size(), ErrorCode::DimensionMismatch, "weights and price relatives differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * y.y[i];
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] * y.y[i] / total;
  return out;
}

namespace {

double raw_residual(std::span<const double> drifted, std::span<const double> target,
                    double commission) {
  double turnover = 0.0;
  for (std::size_t i = 1; i < target.size(); ++i) turnover += std::abs(target[i] - drifted[i]);
  return 1.0 - commission * turnover;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double transaction_residual(std::span<const double> drifted, std::span<const double> target,
                            const RewardConfig& cfg) {
  require(drifted.size() == target.size(), ErrorCode::DimensionMismatch,
          "drifted and target weights differ in length");
  return std::max(raw_residual(drifted, target, cfg.commission), kMinResidual);
}

StepResult step(const PortfolioState& ps, const Action& action, const PriceRelativeVector& y,
                const RewardConfig& cfg) {
  const std::size_t n = ps.weights.size();
  require(action.weights.size() == n && y.y.size() == n, ErrorCode::DimensionMismatch,
          "step dimensions differ");
  const double mu = transaction_residual(ps.weights, action.weights, cfg);
  const double growth = mu * dot(y.y, action.weights);
  require(growth > 0.0 && std::isfinite(growth), ErrorCode::NonPositiveGrowth,
          "period growth must be positive");
  StepResult out;
  out.reward = std::log(growth);
  out.state.value = ps.value * growth;
  out.state.weights = drifted_weights(action.weights, y);
  return out;
}

std::vector<double> reward_gradient(std::span<const double> drifted, std::span<const double> action,
                                    const PriceRelativeVector& y, const RewardConfig& cfg) {
  const std::size_t n = action.size();
  require(drifted.size() == n && y.y.size() == n, ErrorCode::DimensionMismatch,
          "reward gradient dimensions differ");
  const double portfolio_growth = dot(y.y, action);
  const double mu_raw = raw_residual(drifted, action, cfg.commission);
  const bool clamped = mu_raw < kMinResidual;
  const double mu = clamped ? kMinResidual : mu_raw;

  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = y.y[i] / portfolio_growth;
    if (i == 0 || clamped) continue;
    const double diff = action[i] - drifted[i];
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    g[i] += -cfg.commission * sign / mu;
  }
  return g;
}

double batch_reward(std::span<const double> rewards) {
  require(!rewards.empty(), ErrorCode::EmptyBatch, "no rewards to average");
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

std::vector<std::size_t> sample_batch(const MarketFrame& frame, const TrainConfig& cfg, Rng& rng) {
  const std::size_t first = cfg.window - 1;
  require(frame.length() >= cfg.episode_length + 1 + first, ErrorCode::FrameTooShort,
          "frame of length " + std::to_string(frame.length()) + " cannot hold an episode of " +
              std::to_string(cfg.episode_length) + " periods");
  const std::size_t last = frame.length() - cfg.episode_length - 1;
  std::uniform_int_distribution<std::size_t> pick(first, last);
  std::vector<std::size_t> starts(cfg.batch_size);
  for (auto& s : starts) s = pick(rng);
  return starts;
}

namespace {

struct EpisodeOutcome {
  GradientSet grads;
  double mean_reward = 0.0;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

EpisodeOutcome run_episode(const SdpNetwork& net, const MarketFrame& frame, std::size_t start,
                           const TrainConfig& tcfg, const RewardConfig& rcfg,
                           std::uint64_t encoder_seed) {
  const std::size_t E = tcfg.episode_length;
  EpisodeOutcome out{GradientSet::zeros_like(net), 0.0};
  Rng rng(encoder_seed);
  Rng* rng_ptr = net.coder.mode() == EncodingMode::Probabilistic ? &rng : nullptr;

  PortfolioState ps = PortfolioState::initial(frame.assets());
  std::vector<double> rewards;
  rewards.reserve(E);
  std::vector<double> dloss(net.actions());
  for (std::size_t t = start; t < start + E; ++t) {
    const StateVector state = build_state(frame, t, ps.weights, tcfg.window);
    const ForwardResult fr = forward(net, state, rng_ptr);
    const PriceRelativeVector y = price_relatives(frame, t + 1);

    const auto dr = reward_gradient(ps.weights, fr.action.weights, y, rcfg);
    for (std::size_t i = 0; i < dloss.size(); ++i) dloss[i] = -dr[i] / static_cast<double>(E);
    out.grads.add(backward(net, fr.trace, dloss, tcfg.surrogate));

    StepResult sr = step(ps, fr.action, y, rcfg);
    rewards.push_back(sr.reward);
    ps = std::move(sr.state);
  }
  out.mean_reward = batch_reward(rewards);
  return out;
}

}  // namespace

TrainResult train(SdpNetwork& net, const MarketFrame& frame, const TrainConfig& tcfg,
                  const RewardConfig& rcfg, OptimizerState& opt, const TrainCallbacks& callbacks) {
  validate(tcfg);
  validate(rcfg);
  validate(net);
  require(net.actions() == frame.assets() + 1, ErrorCode::DimensionMismatch,
          "network action count must be assets + 1");
  require(net.coder.dims() == state_dimension(frame.assets(), tcfg.window),
          ErrorCode::DimensionMismatch, "network coder does not match the state layout");

  Rng sampler(tcfg.seed);
  TrainResult result;
  result.history.reserve(tcfg.steps);
  const std::size_t B = tcfg.batch_size;
  std::vector<EpisodeOutcome> outcomes(B);

  for (std::size_t s = 1; s <= tcfg.steps; ++s) {
    const auto starts = sample_batch(frame, tcfg, sampler);

    // Episodes are independent; each writes only its own slot.
    auto work = [&](std::size_t b) {
      const std::uint64_t encoder_seed = mix(tcfg.seed ^ mix(s * 0x10001ULL + b));
      outcomes[b] = run_episode(net, frame, starts[b], tcfg, rcfg, encoder_seed);
    };
    const std::size_t workers = std::min(tcfg.threads, B);
    if (workers <= 1) {
      for (std::size_t b = 0; b < B; ++b) work(b);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
          for (std::size_t b = w; b < B; b += workers) work(b);
        });
      for (auto& th : pool) th.join();
    }

    // Fixed-order reduction.
    GradientSet total = std::move(outcomes[0].grads);
    double reward_sum = outcomes[0].mean_reward;
    for (std::size_t b = 1; b < B; ++b) {
      total.add(outcomes[b].grads);
      reward_sum += outcomes[b].mean_reward;
    }
    total.scale(1.0 / static_cast<double>(B));
    require(total.all_finite(), ErrorCode::InvalidArgument, "non-finite gradient during training");

    TrainRecord record;
    record.step = s;
    record.mean_reward = reward_sum / static_cast<double>(B);
    record.gradient_norm = clip_gradients(total, tcfg.clip_norm);
    apply_gradients(net, total, opt);

    result.history.push_back(record);
    if (callbacks.on_step) callbacks.on_step(record);
    if (callbacks.on_update) callbacks.on_update(s, net, opt);
  }
  return result;
}

}  // namespace sdp

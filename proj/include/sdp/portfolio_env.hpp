#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdp/market_data.hpp"
#include "sdp/snn_core.hpp"
#include "sdp/stbp.hpp"

namespace sdp {

struct PortfolioState {
  double value = 1.0;
  std::vector<double> weights;  // cash first

  /// p_0 = 1, everything in cash.
  static PortfolioState initial(std::size_t assets);
};

struct RewardConfig {
  double commission = 0.0025;
  double risk_free = 0.0;  // per period, used by metrics only

  bool operator==(const RewardConfig&) const = default;
};

void validate(const RewardConfig& cfg);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t steps = 1000;
  std::size_t episode_length = 50;
  std::size_t window = 1;
  std::uint64_t seed = 0;
  double clip_norm = 10.0;
  SurrogateParams surrogate;
  std::size_t threads = 1;
};

void validate(const TrainConfig& cfg);

inline constexpr double kMinResidual = 1e-6;

std::vector<double> drifted_weights(std::span<const double> weights,
                                    const PriceRelativeVector& y);

/// First-order commission model: 1 - c_s * sum over risky assets of |target - drift|,
/// clamped below at kMinResidual.
double transaction_residual(std::span<const double> drifted, std::span<const double> target,
                            const RewardConfig& cfg);

struct StepResult {
  PortfolioState state;
  double reward = 0.0;  // ln of the period growth factor
};

StepResult step(const PortfolioState& ps, const Action& action, const PriceRelativeVector& y,
                const RewardConfig& cfg);

/// d reward / d action for one period.
std::vector<double> reward_gradient(std::span<const double> drifted, std::span<const double> action,
                                    const PriceRelativeVector& y, const RewardConfig& cfg);

double batch_reward(std::span<const double> rewards);

/// Episode start indices, uniform over [first, frame.length() - episode_length - 1]
/// where first = window - 1.
std::vector<std::size_t> sample_batch(const MarketFrame& frame, const TrainConfig& cfg, Rng& rng);

struct TrainRecord {
  std::size_t step = 0;
  double mean_reward = 0.0;   // mean of R over the batch, before the update
  double gradient_norm = 0.0;  // before clipping
};

struct TrainCallbacks {
  std::function<void(const TrainRecord&)> on_step;
  /// Called after the update of step `step` (1-based).
  std::function<void(std::size_t step, const SdpNetwork&, const OptimizerState&)> on_update;
};

struct TrainResult {
  std::vector<TrainRecord> history;
};

/// Maximizes the mean log-return of sampled episodes. Each decision contributes
/// -1/E * d r_t / d a_t to its own backward pass; the dependence of later
/// states on earlier actions is not differentiated.
TrainResult train(SdpNetwork& net, const MarketFrame& frame, const TrainConfig& tcfg,
                  const RewardConfig& rcfg, OptimizerState& opt, const TrainCallbacks& callbacks = {});

}  // namespace sdp

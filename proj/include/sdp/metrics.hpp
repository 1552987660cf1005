#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdp/market_data.hpp"
#include "sdp/portfolio_env.hpp"
#include "sdp/snn_core.hpp"

namespace sdp {

struct EquityCurve {
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;  // p_0 = 1 first
};

/// Final value over initial value.
double fapv(std::span<const double> curve);

/// Maximum peak-to-trough loss, one pass with a running peak.
double mdd(std::span<const double> curve);

/// p_t / p_{t-1} - 1 for each consecutive pair.
std::vector<double> periodic_returns(std::span<const double> curve);

/// Mean excess return over its sample standard deviation (n - 1).
/// Throws TooFewReturns (< 2) or ZeroVariance.
double sharpe(std::span<const double> returns, double risk_free = 0.0);

/// Decision function; the frame index is provided for bookkeeping only.
using Policy = std::function<Action(const StateVector& state, std::size_t t)>;

struct BacktestReport {
  std::string strategy;
  double fapv = 1.0;
  std::optional<double> sharpe;  // empty when undefined (zero variance / too short)
  double mdd = 0.0;
  EquityCurve curve;
  std::vector<std::int64_t> weight_timestamps;
  std::vector<std::vector<double>> weights;  // action chosen at each decision
};

struct BacktestOptions {
  std::size_t window = 1;
};

BacktestReport backtest(const std::string& name, const Policy& policy, const MarketFrame& frame,
                        const RewardConfig& cfg, const BacktestOptions& options = {});

/// Recompute fapv / sharpe / mdd from the report's own curve.
void compute_metrics(BacktestReport& report, double risk_free);

/// (0, 1/m, ..., 1/m) at every decision.
Policy ucrp_policy(std::size_t assets);

/// Hindsight: all capital in the asset with the largest close_end / close_start;
/// ties go to the lexicographically smallest symbol.
Policy best_stock_policy(const MarketFrame& frame);
std::size_t best_stock_index(const MarketFrame& frame);

Policy sdp_policy(const SdpNetwork& net);

// Serialization --------------------------------------------------------------

std::string report_json(const BacktestReport& report);
std::string equity_csv(const BacktestReport& report);
std::string weights_csv(const BacktestReport& report);

/// Writes <dir>/<strategy>.json, <strategy>_equity.csv, <strategy>_weights.csv.
void write_report(const BacktestReport& report, const std::filesystem::path& dir);

/// Comparison table in MDD, fAPV, Sharpe column order.
std::string comparison_json(std::span<const BacktestReport> reports);
std::string comparison_text(std::span<const BacktestReport> reports);

}  // namespace sdp

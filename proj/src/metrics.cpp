#include "sdp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "sdp/error.hpp"

namespace sdp {

namespace {

void check_curve(std::span<const double> curve) {
  require(!curve.empty(), ErrorCode::InvalidArgument, "equity curve is empty");
  for (double v : curve)
    require(v > 0.0 && std::isfinite(v), ErrorCode::InvalidArgument, "equity values must be positive");
}

}  // namespace

double fapv(std::span<const double> curve) {
  check_curve(curve);
  return curve.back() / curve.front();
}

double mdd(std::span<const double> curve) {
  check_curve(curve);
  double peak = curve.front();
  double worst = 0.0;
  for (double v : curve) {
    peak = std::max(peak, v);
    worst = std::max(worst, (peak - v) / peak);
  }
  return worst;
}

std::vector<double> periodic_returns(std::span<const double> curve) {
  std::vector<double> out;
  for (std::size_t i = 1; i < curve.size(); ++i) out.push_back(curve[i] / curve[i - 1] - 1.0);
  return out;
}

double sharpe(std::span<const double> returns, double risk_free) {
  require(returns.size() >= 2, ErrorCode::TooFewReturns, "sharpe needs at least two returns");
  const double n = static_cast<double>(returns.size());
  double mean = 0.0;
  for (double r : returns) mean += r - risk_free;
  mean /= n;
  double ss = 0.0;
  for (double r : returns) {
    const double d = (r - risk_free) - mean;
    ss += d * d;
  }
  const double variance = ss / (n - 1.0);
  require(variance > 0.0, ErrorCode::ZeroVariance, "excess returns have zero variance");
  return mean / std::sqrt(variance);
}

void compute_metrics(BacktestReport& report, double risk_free) {
  const auto& v = report.curve.values;
  report.fapv = fapv(v);
  report.mdd = mdd(v);
  try {
    report.sharpe = sharpe(periodic_returns(v), risk_free);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance && e.code() != ErrorCode::TooFewReturns) throw;
    report.sharpe.reset();
  }
}

BacktestReport backtest(const std::string& name, const Policy& policy, const MarketFrame& frame,
                        const RewardConfig& cfg, const BacktestOptions& options) {
  validate(cfg);
  const std::size_t first = options.window - 1;
  require(frame.length() >= first + 2, ErrorCode::TooShort, "backtest frame needs two columns");

  BacktestReport report;
  report.strategy = name;
  PortfolioState ps = PortfolioState::initial(frame.assets());
  report.curve.timestamps.push_back(frame.timestamps()[first]);
  report.curve.values.push_back(ps.value);

  for (std::size_t t = first; t + 1 < frame.length(); ++t) {
    const StateVector state = build_state(frame, t, ps.weights, options.window);
    const Action action = policy(state, t);
    check_simplex(action.weights, frame.assets() + 1);
    StepResult sr = step(ps, action, price_relatives(frame, t + 1), cfg);
    report.weight_timestamps.push_back(frame.timestamps()[t]);
    report.weights.push_back(action.weights);
    ps = std::move(sr.state);
    report.curve.timestamps.push_back(frame.timestamps()[t + 1]);
    report.curve.values.push_back(ps.value);
  }
  compute_metrics(report, cfg.risk_free);
  return report;
}

Policy ucrp_policy(std::size_t assets) {
  require(assets >= 1, ErrorCode::InvalidArgument, "UCRP needs at least one asset");
  Action a;
  a.weights.assign(assets + 1, 1.0 / static_cast<double>(assets));
  a.weights[0] = 0.0;
  return [a](const StateVector&, std::size_t) { return a; };
}

std::size_t best_stock_index(const MarketFrame& frame) {
  require(frame.length() >= 1 && frame.assets() >= 1, ErrorCode::InvalidArgument,
          "best stock needs a non-empty frame");
  std::size_t best = 0;
  double best_growth = 0.0;
  for (std::size_t a = 0; a < frame.assets(); ++a) {
    const double growth = frame.close(a, frame.length() - 1) / frame.close(a, 0);
    const bool better = a == 0 || growth > best_growth ||
                        (growth == best_growth && frame.symbols()[a] < frame.symbols()[best]);
    if (better) {
      best = a;
      best_growth = growth;
    }
  }
  return best;
}

Policy best_stock_policy(const MarketFrame& frame) {
  Action a;
  a.weights.assign(frame.assets() + 1, 0.0);
  a.weights[best_stock_index(frame) + 1] = 1.0;
  return [a](const StateVector&, std::size_t) { return a; };
}

Policy sdp_policy(const SdpNetwork& net) {
  return [&net](const StateVector& state, std::size_t) { return infer(net, state); };
}

// ---------------------------------------------------------------------------

std::string report_json(const BacktestReport& r) {
  nlohmann::ordered_json j;
  j["strategy"] = r.strategy;
  j["mdd"] = r.mdd;
  j["fapv"] = r.fapv;
  j["sharpe"] = r.sharpe ? nlohmann::ordered_json(*r.sharpe) : nlohmann::ordered_json(nullptr);
  j["periods"] = r.weights.size();
  j["equity"] = r.curve.values;
  j["equity_timestamps"] = r.curve.timestamps;
  j["weights"] = r.weights;
  j["weight_timestamps"] = r.weight_timestamps;
  return j.dump(2) + "\n";
}

std::string equity_csv(const BacktestReport& r) {
  std::ostringstream out;
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < r.curve.values.size(); ++i)
    out << r.curve.timestamps[i] << ',' << format_double(r.curve.values[i]) << '\n';
  return out.str();
}

std::string weights_csv(const BacktestReport& r) {
  std::ostringstream out;
  out << "timestamp";
  const std::size_t n = r.weights.empty() ? 0 : r.weights.front().size();
  for (std::size_t i = 0; i < n; ++i) out << ",w" << i;
  out << '\n';
  for (std::size_t t = 0; t < r.weights.size(); ++t) {
    out << r.weight_timestamps[t];
    for (double w : r.weights[t]) out << ',' << format_double(w);
    out << '\n';
  }
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

void write_report(const BacktestReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / (report.strategy + ".json"), report_json(report));
  write_text(dir / (report.strategy + "_equity.csv"), equity_csv(report));
  write_text(dir / (report.strategy + "_weights.csv"), weights_csv(report));
}

std::string comparison_json(std::span<const BacktestReport> reports) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["strategy"] = r.strategy;
    row["mdd"] = r.mdd;
    row["fapv"] = r.fapv;
    row["sharpe"] = r.sharpe ? nlohmann::ordered_json(*r.sharpe) : nlohmann::ordered_json(nullptr);
    rows.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["columns"] = {"mdd", "fapv", "sharpe"};
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string comparison_text(std::span<const BacktestReport> reports) {
  std::size_t name_width = 8;
  for (const auto& r : reports) name_width = std::max(name_width, r.strategy.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %10s  %12s  %12s\n", static_cast<int>(name_width),
                "Strategy", "MDD", "fAPV", "Sharpe");
  out << buf;
  for (const auto& r : reports) {
    char sharpe_text[32];
    if (r.sharpe)
      std::snprintf(sharpe_text, sizeof(sharpe_text), "%12.4f", *r.sharpe);
    else
      std::snprintf(sharpe_text, sizeof(sharpe_text), "%12s", "n/a");
    std::snprintf(buf, sizeof(buf), "%-*s  %10.4f  %12.4f  %s\n", static_cast<int>(name_width),
                  r.strategy.c_str(), r.mdd, r.fapv, sharpe_text);
    out << buf;
  }
  return out.str();
}

}  // namespace sdp

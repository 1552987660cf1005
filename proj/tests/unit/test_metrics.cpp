#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sdp/metrics.hpp"

using namespace sdp;
using testing::error_of;

namespace {

MarketFrame frame_of(std::vector<AssetSeries> s) { return align(s, 1); }

Policy all_cash(std::size_t assets) {
  Action a;
  a.weights.assign(assets + 1, 0.0);
  a.weights[0] = 1.0;
  return [a](const StateVector&, std::size_t) { return a; };
}

}  // namespace

TEST_CASE("fapv") {
  const double flat[] = {1, 1, 1};
  CHECK(fapv(flat) == 1.0);
  const double up[] = {1, 1.5, 3};
  CHECK(fapv(up) == 3.0);
  const double down[] = {1, 0.5};
  CHECK(fapv(down) == 0.5);
}

TEST_CASE("mdd examples") {
  const double mono[] = {1, 1.1, 1.1, 2};
  CHECK(mdd(mono) == 0.0);
  const double dip[] = {1, 2, 1, 3};
  CHECK(mdd(dip) == 0.5);
  const double fall[] = {3, 1};
  CHECK(mdd(fall) == doctest::Approx(2.0 / 3).epsilon(1e-15));
}

TEST_CASE("mdd equals all-pairs brute force and respects scale (property)") {
  std::mt19937_64 rng(13);
  std::lognormal_distribution<double> step(0.0, 0.05);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> curve{1.0};
    while (curve.size() < n) curve.push_back(curve.back() * step(rng));
    CHECK(mdd(curve) == oracle::brute_force_mdd(curve));
    CHECK((mdd(curve) == 0.0) == std::is_sorted(curve.begin(), curve.end()));
    CHECK(fapv(curve) >= *std::min_element(curve.begin(), curve.end()));

    std::vector<double> scaled = curve;
    for (auto& v : scaled) v *= 3.7;
    CHECK(mdd(scaled) == doctest::Approx(mdd(curve)).epsilon(1e-12));
    CHECK(fapv(scaled) == doctest::Approx(fapv(curve)).epsilon(1e-12));
  }
}

TEST_CASE("sharpe") {
  const double alternating[] = {0.1, -0.1, 0.1, -0.1};
  CHECK(sharpe(alternating) == 0.0);
  const double pair[] = {0.02, 0.04};
  CHECK(sharpe(pair) == doctest::Approx(0.03 / std::sqrt(0.0002)).epsilon(1e-12));
  CHECK(sharpe(pair) == doctest::Approx(2.1213).epsilon(1e-4));
  const double constant[] = {0.01, 0.01, 0.01};
  CHECK(error_of([&] { sharpe(constant); }) == ErrorCode::ZeroVariance);
  const double one[] = {0.01};
  CHECK(error_of([&] { sharpe(one); }) == ErrorCode::TooFewReturns);
  // risk-free subtracts from every return
  CHECK(std::abs(sharpe(pair, 0.03)) < 1e-12);
}

TEST_CASE("all-cash backtest") {
  const auto f = frame_of({testing::trending_series("A", 30, 1.02), testing::trending_series("B", 30, 0.97)});
  const auto r = backtest("cash", all_cash(2), f, {0.0025, 0.0});
  CHECK(r.fapv == 1.0);
  CHECK(r.mdd == 0.0);
  CHECK_FALSE(r.sharpe.has_value());
  for (double v : r.curve.values) CHECK(v == 1.0);
  CHECK(r.curve.values.size() == 30);
  CHECK(r.weights.size() == 29);
  CHECK(report_json(r).find("\"sharpe\": null") != std::string::npos);
}

TEST_CASE("full weight on one asset telescopes the price relatives") {
  const auto f = frame_of({testing::trending_series("A", 25, 1.013), testing::trending_series("B", 25, 0.98)});
  Action a{{0.0, 1.0, 0.0}};
  const auto r = backtest("hold", [a](const StateVector&, std::size_t) { return a; }, f, {0.0, 0.0});
  CHECK(r.fapv == doctest::Approx(f.close(0, 24) / f.close(0, 0)).epsilon(1e-12));
}

TEST_CASE("backtest is deterministic and its metrics are recomputable") {
  std::mt19937_64 rng(2);
  const auto f = frame_of({testing::trending_series("A", 40, 1.01), testing::trending_series("B", 40, 0.995)});
  auto net = oracle::random_tiny_net(rng, 2, 3, {6}, 3);
  const auto r1 = backtest("sdp", sdp_policy(net), f, {0.0025, 0.0});
  const auto r2 = backtest("sdp", sdp_policy(net), f, {0.0025, 0.0});
  CHECK(report_json(r1) == report_json(r2));
  auto copy = r1;
  compute_metrics(copy, 0.0);
  CHECK(copy.fapv == r1.fapv);
  CHECK(copy.mdd == r1.mdd);
  CHECK(copy.sharpe == r1.sharpe);
}

TEST_CASE("UCRP policy") {
  CHECK(ucrp_policy(2)(StateVector{}, 0).weights == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(ucrp_policy(1)(StateVector{}, 0).weights == std::vector<double>{0.0, 1.0});
  const auto w = ucrp_policy(7)(StateVector{}, 0).weights;
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(std::abs(s - 1.0) < 1e-9);

  const auto flat = frame_of({testing::flat_series("A", 20), testing::flat_series("B", 20, 3.0)});
  const auto r = backtest("ucrp", ucrp_policy(2), flat, {0.0025, 0.0});
  CHECK(r.fapv == doctest::Approx(1.0 - 0.0025).epsilon(1e-15));  // only the initial buy costs
  CHECK(r.mdd == doctest::Approx(0.0025).epsilon(1e-12));
  const auto free = backtest("ucrp", ucrp_policy(2), flat, {0.0, 0.0});
  CHECK(free.fapv == 1.0);
  CHECK(free.mdd == 0.0);
}

TEST_CASE("Best Stock policy") {
  auto a = testing::flat_series("A", 10, 1.0);
  auto b = testing::flat_series("B", 10, 1.0);
  a.candles.back() = {a.candles.back().timestamp, 2, 2, 2, 2, 1};
  b.candles.back() = {b.candles.back().timestamp, 1.5, 1.5, 1.5, 1.5, 1};
  const auto f = frame_of({b, a});  // A is row 1
  CHECK(best_stock_index(f) == 1);
  auto r = backtest("best_stock", best_stock_policy(f), f, {0.0, 0.0});
  CHECK(r.fapv == 2.0);
  r = backtest("best_stock", best_stock_policy(f), f, {0.0025, 0.0});
  CHECK(r.fapv == doctest::Approx(2.0 * (1 - 0.0025)).epsilon(1e-15));

  const auto tie = frame_of({testing::flat_series("Z", 10), testing::flat_series("M", 10)});
  CHECK(tie.symbols()[best_stock_index(tie)] == "M");
  CHECK(backtest("b", best_stock_policy(tie), tie, {0.0, 0.0}).fapv == 1.0);
}

TEST_CASE("report serialisation shapes") {
  const auto f = frame_of({testing::trending_series("A", 5, 1.1), testing::trending_series("B", 5, 0.9)});
  const auto r = backtest("ucrp", ucrp_policy(2), f, {0.0, 0.0});
  const auto eq = equity_csv(r);
  CHECK(eq.rfind("timestamp,value\n", 0) == 0);
  CHECK(std::count(eq.begin(), eq.end(), '\n') == 6);
  const auto w = weights_csv(r);
  CHECK(w.rfind("timestamp,w0,w1,w2\n", 0) == 0);
  CHECK(w.find("0,0,0.5,0.5\n") != std::string::npos);

  const BacktestReport rows[] = {r, backtest("best_stock", best_stock_policy(f), f, {0.0, 0.0})};
  const auto text = comparison_text(rows);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.find("MDD") < text.find("fAPV"));
  CHECK(text.find("fAPV") < text.find("Sharpe"));
  const auto js = comparison_json(rows);
  CHECK(js.find("\"columns\"") != std::string::npos);

  testing::TempDir dir("report");
  write_report(r, dir.path());
  CHECK(testing::read_file(dir / "ucrp.json") == report_json(r));
  CHECK(testing::read_file(dir / "ucrp_equity.csv") == eq);
  CHECK(testing::read_file(dir / "ucrp_weights.csv") == w);
}

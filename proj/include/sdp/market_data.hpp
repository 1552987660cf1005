#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sdp {

/// One OHLCV bar. Timestamps are UTC seconds.
struct Candle {
  std::int64_t timestamp = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool operator==(const Candle&) const = default;
};

/// True when prices are positive and open/close sit inside [low, high].
bool is_valid(const Candle& candle) noexcept;

struct AssetSeries {
  std::string symbol;
  std::vector<Candle> candles;
  std::int64_t period = 1800;

  bool operator==(const AssetSeries&) const = default;
};

/// Throws on the first violated candle or stride invariant.
void validate(const AssetSeries& series);

/// Time-aligned m x t_total OHLCV matrices. Row i belongs to symbols[i].
class MarketFrame {
 public:
  MarketFrame() = default;
  MarketFrame(std::vector<std::string> symbols, std::vector<std::int64_t> timestamps,
              std::int64_t period);

  std::size_t assets() const noexcept { return symbols_.size(); }
  std::size_t length() const noexcept { return timestamps_.size(); }
  std::int64_t period() const noexcept { return period_; }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::vector<std::int64_t>& timestamps() const noexcept { return timestamps_; }

  double open(std::size_t asset, std::size_t t) const { return opens_[index(asset, t)]; }
  double high(std::size_t asset, std::size_t t) const { return highs_[index(asset, t)]; }
  double low(std::size_t asset, std::size_t t) const { return lows_[index(asset, t)]; }
  double close(std::size_t asset, std::size_t t) const { return closes_[index(asset, t)]; }
  double volume(std::size_t asset, std::size_t t) const { return volumes_[index(asset, t)]; }
  Candle candle(std::size_t asset, std::size_t t) const;

  void set(std::size_t asset, std::size_t t, const Candle& candle);

  /// Columns [begin, end).
  MarketFrame slice(std::size_t begin, std::size_t end) const;

  bool operator==(const MarketFrame&) const = default;

 private:
  std::size_t index(std::size_t asset, std::size_t t) const noexcept {
    return asset * timestamps_.size() + t;
  }

  std::vector<std::string> symbols_;
  std::vector<std::int64_t> timestamps_;
  std::int64_t period_ = 0;
  std::vector<double> opens_, highs_, lows_, closes_, volumes_;
};

/// Flattened state: per lag [close/open]*m ++ [high/open]*m ++ [low/open]*m,
/// then the previous weights (cash first).
struct StateVector {
  std::vector<double> values;
};

/// y[0] = 1 for cash, y[i] = close_t / close_{t-1} for asset i.
struct PriceRelativeVector {
  std::vector<double> y;
};

struct DatasetSplit {
  MarketFrame train;
  MarketFrame backtest;
  std::int64_t boundary_timestamp = 0;  // first backtest timestamp
};

inline constexpr double kSimplexTolerance = 1e-9;

/// Throws NotOnSimplex / WeightDimensionMismatch.
void check_simplex(std::span<const double> weights, std::size_t expected_size);

AssetSeries load_csv(const std::filesystem::path& path, std::int64_t period,
                     std::string symbol = {});
void write_csv(const AssetSeries& series, const std::filesystem::path& path);

MarketFrame align(std::span<const AssetSeries> series, std::size_t min_columns = 100);

/// Inverse of align for a single row of the frame.
AssetSeries row_series(const MarketFrame& frame, std::size_t asset);

std::vector<std::string> select_universe(std::span<const AssetSeries> candidates,
                                         std::size_t k, std::size_t lookback);

PriceRelativeVector price_relatives(const MarketFrame& frame, std::size_t t);

/// State dimension for m assets and a lookback window of W candles.
constexpr std::size_t state_dimension(std::size_t assets, std::size_t window = 1) {
  return 3 * assets * window + assets + 1;
}

StateVector build_state(const MarketFrame& frame, std::size_t t,
                        std::span<const double> prev_weights, std::size_t window = 1);

DatasetSplit split(const MarketFrame& frame, double ratio);

/// Long-format frame file: timestamp,symbol,open,high,low,close,volume.
void write_frame_csv(const MarketFrame& frame, const std::filesystem::path& path);
MarketFrame load_frame_csv(const std::filesystem::path& path, std::int64_t period);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace sdp

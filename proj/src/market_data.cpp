#include "sdp/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sdp/error.hpp"

namespace sdp {

namespace {

constexpr const char* kCsvHeader = "timestamp,open,high,low,close,volume";
constexpr const char* kFrameHeader = "timestamp,symbol,open,high,low,close,volume";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string describe(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

bool is_valid(const Candle& c) noexcept {
  const bool finite = std::isfinite(c.open) && std::isfinite(c.high) && std::isfinite(c.low) &&
                      std::isfinite(c.close) && std::isfinite(c.volume);
  return finite && c.open > 0 && c.high > 0 && c.low > 0 && c.close > 0 && c.volume >= 0 &&
         c.low <= c.high && c.low <= c.open && c.open <= c.high && c.low <= c.close &&
         c.close <= c.high;
}

void validate(const AssetSeries& series) {
  require(series.period > 0, ErrorCode::InvalidArgument, "period must be positive");
  for (std::size_t i = 0; i < series.candles.size(); ++i) {
    const Candle& c = series.candles[i];
    require(is_valid(c), ErrorCode::InvalidCandle,
            series.symbol + ": invalid candle at timestamp " + std::to_string(c.timestamp));
    if (i == 0) continue;
    const auto prev = series.candles[i - 1].timestamp;
    require(c.timestamp > prev, ErrorCode::NonMonotonicTimestamps,
            series.symbol + ": timestamp " + std::to_string(c.timestamp) + " does not follow " +
                std::to_string(prev));
    require(c.timestamp - prev == series.period, ErrorCode::GapDetected,
            series.symbol + ": stride " + std::to_string(c.timestamp - prev) + " != period " +
                std::to_string(series.period));
  }
}

// ---------------------------------------------------------------------------
// MarketFrame

MarketFrame::MarketFrame(std::vector<std::string> symbols, std::vector<std::int64_t> timestamps,
                         std::int64_t period)
    : symbols_(std::move(symbols)), timestamps_(std::move(timestamps)), period_(period) {
  const std::size_t n = symbols_.size() * timestamps_.size();
  opens_.assign(n, 0.0);
  highs_.assign(n, 0.0);
  lows_.assign(n, 0.0);
  closes_.assign(n, 0.0);
  volumes_.assign(n, 0.0);
}

Candle MarketFrame::candle(std::size_t asset, std::size_t t) const {
  const auto i = index(asset, t);
  return Candle{timestamps_.at(t), opens_[i], highs_[i], lows_[i], closes_[i], volumes_[i]};
}

void MarketFrame::set(std::size_t asset, std::size_t t, const Candle& c) {
  require(asset < assets() && t < length(), ErrorCode::IndexOutOfRange, "frame cell out of range");
  const auto i = index(asset, t);
  opens_[i] = c.open;
  highs_[i] = c.high;
  lows_[i] = c.low;
  closes_[i] = c.close;
  volumes_[i] = c.volume;
}

MarketFrame MarketFrame::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= length(), ErrorCode::IndexOutOfRange, "bad frame slice");
  MarketFrame out(symbols_,
                  std::vector<std::int64_t>(timestamps_.begin() + begin, timestamps_.begin() + end),
                  period_);
  for (std::size_t a = 0; a < assets(); ++a)
    for (std::size_t t = begin; t < end; ++t) out.set(a, t - begin, candle(a, t));
  return out;
}

// ---------------------------------------------------------------------------

void check_simplex(std::span<const double> w, std::size_t expected_size) {
  require(w.size() == expected_size, ErrorCode::WeightDimensionMismatch,
          "weights have length " + std::to_string(w.size()) + ", expected " +
              std::to_string(expected_size));
  double sum = 0.0;
  for (double x : w) {
    require(std::isfinite(x) && x >= 0.0, ErrorCode::NotOnSimplex, "negative or non-finite weight");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= kSimplexTolerance, ErrorCode::NotOnSimplex,
          "weights sum to " + format_double(sum));
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

AssetSeries load_csv(const std::filesystem::path& path, std::int64_t period, std::string symbol) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::FileNotFound, "cannot open " + path.string());

  AssetSeries series;
  series.symbol = symbol.empty() ? path.stem().string() : std::move(symbol);
  series.period = period;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      require(text == kCsvHeader, ErrorCode::MalformedRow,
              describe(path, line_no) + ": expected header '" + kCsvHeader + "'");
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(text);
    require(fields.size() == 6, ErrorCode::MalformedRow,
            describe(path, line_no) + ": expected 6 fields, got " + std::to_string(fields.size()));
    Candle c;
    const bool ok = parse_number(fields[0], c.timestamp) && parse_number(fields[1], c.open) &&
                    parse_number(fields[2], c.high) && parse_number(fields[3], c.low) &&
                    parse_number(fields[4], c.close) && parse_number(fields[5], c.volume);
    require(ok, ErrorCode::MalformedRow, describe(path, line_no) + ": unparseable field");
    series.candles.push_back(c);
  }
  require(header_seen, ErrorCode::MalformedRow, path.string() + ": missing header");
  validate(series);
  return series;
}

void write_csv(const AssetSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << kCsvHeader << '\n';
  for (const Candle& c : series.candles) {
    out << c.timestamp << ',' << format_double(c.open) << ',' << format_double(c.high) << ','
        << format_double(c.low) << ',' << format_double(c.close) << ','
        << format_double(c.volume) << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

MarketFrame align(std::span<const AssetSeries> series, std::size_t min_columns) {
  require(!series.empty(), ErrorCode::EmptyIntersection, "no series to align");
  const auto period = series.front().period;
  for (const auto& s : series)
    require(s.period == period, ErrorCode::PeriodMismatch,
            s.symbol + " has period " + std::to_string(s.period) + ", expected " +
                std::to_string(period));

  std::vector<std::int64_t> common;
  for (const auto& c : series.front().candles) common.push_back(c.timestamp);
  std::sort(common.begin(), common.end());
  for (std::size_t i = 1; i < series.size(); ++i) {
    std::vector<std::int64_t> other;
    for (const auto& c : series[i].candles) other.push_back(c.timestamp);
    std::sort(other.begin(), other.end());
    std::vector<std::int64_t> both;
    std::set_intersection(common.begin(), common.end(), other.begin(), other.end(),
                          std::back_inserter(both));
    common = std::move(both);
  }
  require(!common.empty() && common.size() >= min_columns, ErrorCode::EmptyIntersection,
          "shared timestamps: " + std::to_string(common.size()) + ", minimum " +
              std::to_string(min_columns));

  std::vector<std::string> symbols;
  for (const auto& s : series) symbols.push_back(s.symbol);
  MarketFrame frame(std::move(symbols), common, period);
  for (std::size_t a = 0; a < series.size(); ++a) {
    std::size_t t = 0;
    for (const auto& c : series[a].candles) {
      while (t < common.size() && common[t] < c.timestamp) ++t;
      if (t < common.size() && common[t] == c.timestamp) frame.set(a, t, c);
    }
  }
  return frame;
}

AssetSeries row_series(const MarketFrame& frame, std::size_t asset) {
  require(asset < frame.assets(), ErrorCode::IndexOutOfRange, "asset index out of range");
  AssetSeries s{frame.symbols()[asset], {}, frame.period()};
  s.candles.reserve(frame.length());
  for (std::size_t t = 0; t < frame.length(); ++t) s.candles.push_back(frame.candle(asset, t));
  return s;
}

std::vector<std::string> select_universe(std::span<const AssetSeries> candidates, std::size_t k,
                                         std::size_t lookback) {
  require(k <= candidates.size(), ErrorCode::InvalidArgument,
          "universe size exceeds candidate count");
  struct Ranked {
    double volume;
    const std::string* symbol;
  };
  std::vector<Ranked> ranked;
  for (const auto& s : candidates) {
    require(lookback <= s.candles.size(), ErrorCode::InsufficientHistory,
            s.symbol + " has " + std::to_string(s.candles.size()) + " candles, lookback " +
                std::to_string(lookback));
    double total = 0.0;
    for (auto it = s.candles.end() - static_cast<std::ptrdiff_t>(lookback); it != s.candles.end();
         ++it)
      total += it->volume;
    ranked.push_back({total, &s.symbol});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.volume != b.volume) return a.volume > b.volume;
    return *a.symbol < *b.symbol;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(*ranked[i].symbol);
  return out;
}

PriceRelativeVector price_relatives(const MarketFrame& frame, std::size_t t) {
  require(t >= 1 && t < frame.length(), ErrorCode::IndexOutOfRange,
          "price relative index " + std::to_string(t) + " outside [1, " +
              std::to_string(frame.length()) + ")");
  PriceRelativeVector out;
  out.y.resize(frame.assets() + 1);
  out.y[0] = 1.0;
  for (std::size_t a = 0; a < frame.assets(); ++a)
    out.y[a + 1] = frame.close(a, t) / frame.close(a, t - 1);
  return out;
}

StateVector build_state(const MarketFrame& frame, std::size_t t,
                        std::span<const double> prev_weights, std::size_t window) {
  const std::size_t m = frame.assets();
  require(window >= 1, ErrorCode::InvalidArgument, "window must be >= 1");
  require(t < frame.length() && t + 1 >= window, ErrorCode::IndexOutOfRange,
          "state index " + std::to_string(t) + " invalid for window " + std::to_string(window));
  check_simplex(prev_weights, m + 1);

  StateVector state;
  state.values.reserve(state_dimension(m, window));
  for (std::size_t lag = 0; lag < window; ++lag) {
    const std::size_t col = t - lag;
    for (std::size_t a = 0; a < m; ++a) state.values.push_back(frame.close(a, col) / frame.open(a, col));
    for (std::size_t a = 0; a < m; ++a) state.values.push_back(frame.high(a, col) / frame.open(a, col));
    for (std::size_t a = 0; a < m; ++a) state.values.push_back(frame.low(a, col) / frame.open(a, col));
  }
  state.values.insert(state.values.end(), prev_weights.begin(), prev_weights.end());
  return state;
}

DatasetSplit split(const MarketFrame& frame, double ratio) {
  require(ratio > 0.0 && ratio < 1.0, ErrorCode::InvalidArgument, "split ratio must be in (0,1)");
  require(frame.length() >= 10, ErrorCode::TooShort,
          "frame has " + std::to_string(frame.length()) + " columns, need >= 10");
  const auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(frame.length())));
  require(cut >= 1 && cut < frame.length(), ErrorCode::TooShort, "split leaves an empty side");
  return DatasetSplit{frame.slice(0, cut), frame.slice(cut, frame.length()),
                      frame.timestamps()[cut]};
}

void write_frame_csv(const MarketFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << kFrameHeader << '\n';
  for (std::size_t t = 0; t < frame.length(); ++t) {
    for (std::size_t a = 0; a < frame.assets(); ++a) {
      const Candle c = frame.candle(a, t);
      out << c.timestamp << ',' << frame.symbols()[a] << ',' << format_double(c.open) << ','
          << format_double(c.high) << ',' << format_double(c.low) << ','
          << format_double(c.close) << ',' << format_double(c.volume) << '\n';
    }
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

MarketFrame load_frame_csv(const std::filesystem::path& path, std::int64_t period) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::FileNotFound, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  // Symbols keep their first-seen order so the frame rows round-trip.
  std::vector<AssetSeries> rows;
  std::map<std::string, std::size_t> row_of;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      require(text == kFrameHeader, ErrorCode::MalformedRow,
              describe(path, line_no) + ": expected frame header");
      header_seen = true;
      continue;
    }
    const auto f = split_fields(text);
    require(f.size() == 7, ErrorCode::MalformedRow, describe(path, line_no) + ": expected 7 fields");
    Candle c;
    const bool ok = parse_number(f[0], c.timestamp) && parse_number(f[2], c.open) &&
                    parse_number(f[3], c.high) && parse_number(f[4], c.low) &&
                    parse_number(f[5], c.close) && parse_number(f[6], c.volume);
    require(ok, ErrorCode::MalformedRow, describe(path, line_no) + ": unparseable field");
    const std::string symbol(trim(f[1]));
    auto [it, inserted] = row_of.emplace(symbol, rows.size());
    if (inserted) rows.push_back(AssetSeries{symbol, {}, period});
    rows[it->second].candles.push_back(c);
  }
  require(header_seen && !rows.empty(), ErrorCode::MalformedRow, path.string() + ": empty frame");
  for (const auto& r : rows) {
    require(r.candles.size() == rows.front().candles.size(), ErrorCode::MalformedRow,
            path.string() + ": ragged frame");
    for (std::size_t i = 0; i < r.candles.size(); ++i) {
      require(is_valid(r.candles[i]), ErrorCode::InvalidCandle, path.string() + ": invalid candle");
      require(i == 0 || r.candles[i].timestamp > r.candles[i - 1].timestamp,
              ErrorCode::NonMonotonicTimestamps, path.string() + ": unordered timestamps");
    }
  }
  return align(rows, 1);
}

}  // namespace sdp

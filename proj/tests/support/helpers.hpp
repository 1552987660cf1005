#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "sdp/error.hpp"
#include "sdp/market_data.hpp"

namespace testing {

/// Code of the sdp::Error raised by `f`, or nullopt when nothing is thrown.
template <typename F>
std::optional<sdp::ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const sdp::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh, empty scratch directory under the system temp dir; removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sdp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Flat candles (open = high = low = close = price) at a fixed stride.
inline sdp::AssetSeries flat_series(const std::string& symbol, std::size_t n, double price = 100.0,
                                    std::int64_t start = 0, std::int64_t period = 1800,
                                    double volume = 1.0) {
  sdp::AssetSeries s{symbol, {}, period};
  for (std::size_t i = 0; i < n; ++i)
    s.candles.push_back({start + static_cast<std::int64_t>(i) * period, price, price, price, price, volume});
  return s;
}

/// Candles whose close grows by `factor` each period; open is the previous close.
inline sdp::AssetSeries trending_series(const std::string& symbol, std::size_t n, double factor,
                                        double first = 100.0, std::int64_t start = 0,
                                        std::int64_t period = 1800) {
  sdp::AssetSeries s{symbol, {}, period};
  double close = first;
  for (std::size_t i = 0; i < n; ++i) {
    const double open = close;
    close = open * factor;
    const double hi = std::max(open, close), lo = std::min(open, close);
    s.candles.push_back({start + static_cast<std::int64_t>(i) * period, open, hi, lo, close, 1.0});
  }
  return s;
}

}  // namespace testing

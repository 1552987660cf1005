#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>

#include "sdp/market_data.hpp"

namespace sdp {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Performs one GET request. Transport failures map to status 0.
using HttpGet = std::function<HttpResponse(const std::string& url)>;

/// Plain GET over cpp-httplib; supports http:// and https://.
HttpGet default_http_get();

/// JSON record keys for each candle field. Defaults follow the Poloniex
/// returnChartData layout.
struct FieldNames {
  std::string timestamp = "date";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string volume = "volume";

  bool operator==(const FieldNames&) const = default;
};

struct FetchRequest {
  std::string url_template;  // {pair} {period} {start} {end}
  std::string pair;
  std::int64_t period = 1800;
  std::int64_t start = 0;
  std::int64_t end = 0;
  FieldNames fields;
};

std::string expand_url(const FetchRequest& request);

/// Parses a JSON array of candle records and validates it like load_csv.
AssetSeries parse_candles(const std::string& body, const FieldNames& fields, std::string symbol,
                          std::int64_t period);

/// Cache file for a request: <root>/<pair>/<period>/<start>-<end>.csv
std::filesystem::path cache_path(const std::filesystem::path& cache_root,
                                 const FetchRequest& request);

/// Remote candlestick client with an on-disk CSV cache. Requests to the same
/// host are serialized and spaced by at least `min_delay`.
class RemoteFetcher {
 public:
  RemoteFetcher(std::filesystem::path cache_root, std::chrono::milliseconds min_delay,
                HttpGet get = default_http_get());

  AssetSeries fetch(const FetchRequest& request);

  std::size_t network_calls() const;

 private:
  std::filesystem::path cache_root_;
  std::chrono::milliseconds min_delay_;
  HttpGet get_;
  mutable std::mutex mutex_;
  std::map<std::string, std::chrono::steady_clock::time_point> last_request_;
  std::size_t calls_ = 0;
};

}  // namespace sdp

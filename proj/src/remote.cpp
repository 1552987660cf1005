#include "sdp/remote.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <thread>

#include "sdp/error.hpp"

namespace sdp {

namespace {

void replace_all(std::string& text, const std::string& key, const std::string& value) {
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
    text.replace(pos, key.size(), value);
}

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string target;  // /path?query
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  require(scheme_end != std::string::npos, ErrorCode::HttpError, "URL without scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string host_key(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return url;
  const auto path_start = url.find('/', scheme_end + 3);
  return url.substr(0, path_start);
}

double number_field(const nlohmann::json& record, const std::string& key) {
  const auto it = record.find(key);
  require(it != record.end(), ErrorCode::ParseError, "record missing field '" + key + "'");
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == s.size() && !s.empty(), ErrorCode::ParseError,
            "field '" + key + "' is not numeric: " + s);
    return value;
  }
  fail(ErrorCode::ParseError, "field '" + key + "' has unsupported type");
}

}  // namespace

HttpGet default_http_get() {
  return [](const std::string& url) -> HttpResponse {
    const auto parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    client.set_follow_location(true);
    auto result = client.Get(parts.target);
    if (!result) return HttpResponse{0, httplib::to_string(result.error())};
    return HttpResponse{result->status, result->body};
  };
}

std::string expand_url(const FetchRequest& r) {
  std::string url = r.url_template;
  replace_all(url, "{pair}", r.pair);
  replace_all(url, "{period}", std::to_string(r.period));
  replace_all(url, "{start}", std::to_string(r.start));
  replace_all(url, "{end}", std::to_string(r.end));
  return url;
}

AssetSeries parse_candles(const std::string& body, const FieldNames& fields, std::string symbol,
                          std::int64_t period) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("response is not JSON: ") + e.what());
  }
  require(doc.is_array(), ErrorCode::ParseError, "response is not an array of records");

  AssetSeries series{std::move(symbol), {}, period};
  series.candles.reserve(doc.size());
  for (const auto& record : doc) {
    require(record.is_object(), ErrorCode::ParseError, "record is not an object");
    Candle c;
    const double ts = number_field(record, fields.timestamp);
    require(ts == std::floor(ts), ErrorCode::ParseError, "non-integral timestamp");
    c.timestamp = static_cast<std::int64_t>(ts);
    c.open = number_field(record, fields.open);
    c.high = number_field(record, fields.high);
    c.low = number_field(record, fields.low);
    c.close = number_field(record, fields.close);
    c.volume = number_field(record, fields.volume);
    series.candles.push_back(c);
  }
  validate(series);
  return series;
}

std::filesystem::path cache_path(const std::filesystem::path& root, const FetchRequest& r) {
  return root / r.pair / std::to_string(r.period) /
         (std::to_string(r.start) + "-" + std::to_string(r.end) + ".csv");
}

RemoteFetcher::RemoteFetcher(std::filesystem::path cache_root, std::chrono::milliseconds min_delay,
                             HttpGet get)
    : cache_root_(std::move(cache_root)), min_delay_(min_delay), get_(std::move(get)) {}

std::size_t RemoteFetcher::network_calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

AssetSeries RemoteFetcher::fetch(const FetchRequest& request) {
  require(request.end > request.start, ErrorCode::InvalidArgument, "empty fetch range");
  const auto cached = cache_path(cache_root_, request);
  if (std::filesystem::exists(cached)) return load_csv(cached, request.period, request.pair);

  const std::string url = expand_url(request);
  HttpResponse response;
  {
    std::lock_guard lock(mutex_);
    const auto key = host_key(url);
    const auto it = last_request_.find(key);
    if (it != last_request_.end()) {
      const auto ready = it->second + min_delay_;
      const auto now = std::chrono::steady_clock::now();
      if (now < ready) std::this_thread::sleep_for(ready - now);
    }
    ++calls_;
    response = get_(url);
    last_request_[key] = std::chrono::steady_clock::now();
  }

  require(response.status != 429, ErrorCode::RateLimited, "server rate limited " + url);
  require(response.status >= 200 && response.status < 300, ErrorCode::HttpError,
          "GET " + url + " failed with status " + std::to_string(response.status) +
              (response.status == 0 ? " (" + response.body + ")" : ""));

  AssetSeries series = parse_candles(response.body, request.fields, request.pair, request.period);
  std::filesystem::create_directories(cached.parent_path());
  write_csv(series, cached);
  return series;
}

}  // namespace sdp

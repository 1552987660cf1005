#include "sdp/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "sdp/checkpoint.hpp"
#include "sdp/error.hpp"

namespace sdp {

using Json = nlohmann::ordered_json;

namespace {

// Reads a JSON object section and rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    require(j_.is_object(), ErrorCode::ConfigError, "'" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::ConfigError, name_ + "." + key + " has the wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items())
      require(seen_.count(item.key()) == 1, ErrorCode::ConfigError,
              "unknown config key " + name_ + "." + item.key());
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

FeatureRange range_from(const Json& j, const std::string& where) {
  require(j.is_array() && (j.size() == 2 || j.size() == 3), ErrorCode::ConfigError,
          where + " must be [lo, hi] or [lo, hi, sigma]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0};
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::ConfigError, where + " must contain numbers");
  }
}

Json range_json(const FeatureRange& r) { return Json::array({r.lo, r.hi, r.sigma}); }

void read_data(const Json& j, DataSection& d, const std::filesystem::path& base) {
  Section s(j, "data");
  if (const Json* csv = s.child("csv")) {
    require(csv->is_array(), ErrorCode::ConfigError, "data.csv must be an array");
    d.csv.clear();
    for (const auto& entry : *csv) {
      Section e(entry, "data.csv[]");
      std::string symbol, path;
      e.read("symbol", symbol);
      e.read("path", path);
      e.finish();
      require(!path.empty(), ErrorCode::ConfigError, "data.csv entries need a path");
      std::filesystem::path p(path);
      if (p.is_relative() && !base.empty()) p = (base / p).lexically_normal();
      if (symbol.empty()) symbol = p.stem().string();
      d.csv.push_back({symbol, p});
    }
  }
  if (const Json* fetch = s.child("fetch"); fetch && !fetch->is_null()) {
    Section f(*fetch, "data.fetch");
    FetchSource src;
    f.read("url_template", src.url_template);
    f.read("pairs", src.pairs);
    f.read("start", src.start);
    f.read("end", src.end);
    f.read("min_delay_ms", src.min_delay_ms);
    if (const Json* fields = f.child("fields")) {
      Section fs(*fields, "data.fetch.fields");
      fs.read("timestamp", src.fields.timestamp);
      fs.read("open", src.fields.open);
      fs.read("high", src.fields.high);
      fs.read("low", src.fields.low);
      fs.read("close", src.fields.close);
      fs.read("volume", src.fields.volume);
      fs.finish();
    }
    f.finish();
    d.fetch = std::move(src);
  }
  s.read("period", d.period);
  s.read("universe_size", d.universe_size);
  s.read("lookback", d.lookback);
  s.read("min_columns", d.min_columns);
  s.read("split_ratio", d.split_ratio);
  s.read("window", d.window);
  s.finish();
}

void read_network(const Json& j, NetworkSection& n) {
  Section s(j, "network");
  s.read("population", n.population);
  if (const Json* r = s.child("price_range")) n.price_range = range_from(*r, "network.price_range");
  if (const Json* r = s.child("weight_range")) n.weight_range = range_from(*r, "network.weight_range");
  s.read("hidden", n.hidden);
  s.read("timesteps", n.timesteps);
  s.read("v_th", n.v_th);
  s.read("d_c", n.d_c);
  s.read("d_v", n.d_v);
  s.read("eps", n.eps);
  std::string encoding = n.encoding == EncodingMode::Deterministic ? "deterministic" : "probabilistic";
  s.read("encoding", encoding);
  require(encoding == "deterministic" || encoding == "probabilistic", ErrorCode::ConfigError,
          "network.encoding must be deterministic or probabilistic");
  n.encoding = encoding == "deterministic" ? EncodingMode::Deterministic : EncodingMode::Probabilistic;
  s.finish();
}

void read_training(const Json& j, TrainingSection& t) {
  Section s(j, "training");
  s.read("learning_rate", t.learning_rate);
  s.read("batch_size", t.batch_size);
  s.read("steps", t.steps);
  s.read("episode_length", t.episode_length);
  s.read("seed", t.seed);
  std::string rule = t.optimizer == OptimizerRule::Adam ? "adam" : "sgd";
  s.read("optimizer", rule);
  require(rule == "adam" || rule == "sgd", ErrorCode::ConfigError, "training.optimizer must be adam or sgd");
  t.optimizer = rule == "adam" ? OptimizerRule::Adam : OptimizerRule::Sgd;
  s.read("clip_norm", t.clip_norm);
  s.read("checkpoint_every", t.checkpoint_every);
  s.read("surrogate_amplitude", t.surrogate_amplitude);
  s.read("surrogate_window", t.surrogate_window);
  s.read("threads", t.threads);
  s.finish();
}

}  // namespace

void validate(const RunConfig& c) {
  const auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  const auto& d = c.data;
  check(d.period > 0, "data.period must be positive");
  check(d.split_ratio > 0.0 && d.split_ratio < 1.0, "data.split_ratio must be in (0,1)");
  check(d.window >= 1, "data.window must be >= 1");
  check(d.lookback >= 1, "data.lookback must be >= 1");
  check(d.universe_size >= 1, "data.universe_size must be >= 1");
  if (d.fetch) {
    check(!d.fetch->url_template.empty(), "data.fetch.url_template is required");
    check(!d.fetch->pairs.empty(), "data.fetch.pairs is required");
    check(d.fetch->end > d.fetch->start, "data.fetch range is empty");
    check(d.fetch->min_delay_ms >= 0, "data.fetch.min_delay_ms must be >= 0");
  }
  const auto& n = c.network;
  check(n.population >= 1, "network.population must be >= 1");
  check(n.price_range.hi > n.price_range.lo, "network.price_range must have lo < hi");
  check(n.weight_range.hi > n.weight_range.lo, "network.weight_range must have lo < hi");
  check(!n.hidden.empty(), "network.hidden needs at least one layer");
  for (auto h : n.hidden) check(h >= 1, "network.hidden sizes must be >= 1");
  check(n.timesteps >= 1, "network.timesteps must be >= 1");
  check(n.v_th > 0.0, "network.v_th must be positive");
  check(n.d_c >= 0.0 && n.d_c <= 1.0, "network.d_c must be in [0,1]");
  check(n.d_v >= 0.0 && n.d_v <= 1.0, "network.d_v must be in [0,1]");
  check(n.eps >= 0.0 && n.eps < 1.0, "network.eps must be in [0,1)");
  const auto& t = c.training;
  check(t.learning_rate >= 0.0, "training.learning_rate must be >= 0");
  check(t.batch_size >= 1, "training.batch_size must be >= 1");
  check(t.episode_length >= 2, "training.episode_length must be >= 2");
  check(t.surrogate_amplitude > 0.0 && t.surrogate_window > 0.0, "surrogate parameters must be positive");
  check(t.threads >= 1, "training.threads must be >= 1");
  check(c.reward.commission >= 0.0 && c.reward.commission <= 0.05, "reward.commission must be in [0, 0.05]");
  check(std::isfinite(c.reward.risk_free), "reward.risk_free must be finite");
  check(c.quantize.w_max >= 1, "quantize.w_max must be >= 1");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::ConfigError, "config must be a JSON object");
  if (j.contains("tool") && j.contains("config")) j = Json(j.at("config"));  // run manifest

  RunConfig c;
  Section root(j, "config");
  if (const Json* s = root.child("data")) read_data(*s, c.data, base_dir);
  if (const Json* s = root.child("network")) read_network(*s, c.network);
  if (const Json* s = root.child("training")) read_training(*s, c.training);
  if (const Json* s = root.child("reward")) {
    Section r(*s, "reward");
    r.read("commission", c.reward.commission);
    r.read("risk_free", c.reward.risk_free);
    r.finish();
  }
  if (const Json* s = root.child("quantize")) {
    Section q(*s, "quantize");
    q.read("w_max", c.quantize.w_max);
    q.finish();
  }
  std::string out = c.output_dir.string();
  root.read("output_dir", out);
  c.output_dir = out;
  root.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return parse_config(text, std::filesystem::absolute(path).parent_path());
}

std::string dump_config(const RunConfig& c) {
  Json csv = Json::array();
  for (const auto& s : c.data.csv) csv.push_back(Json{{"symbol", s.symbol}, {"path", s.path.string()}});
  Json fetch = nullptr;
  if (c.data.fetch) {
    const auto& f = *c.data.fetch;
    fetch = Json{{"url_template", f.url_template},
                 {"pairs", f.pairs},
                 {"start", f.start},
                 {"end", f.end},
                 {"min_delay_ms", f.min_delay_ms},
                 {"fields", Json{{"timestamp", f.fields.timestamp},
                                 {"open", f.fields.open},
                                 {"high", f.fields.high},
                                 {"low", f.fields.low},
                                 {"close", f.fields.close},
                                 {"volume", f.fields.volume}}}};
  }
  const auto& n = c.network;
  const auto& t = c.training;
  Json j{
      {"data", Json{{"csv", std::move(csv)},
                    {"fetch", std::move(fetch)},
                    {"period", c.data.period},
                    {"universe_size", c.data.universe_size},
                    {"lookback", c.data.lookback},
                    {"min_columns", c.data.min_columns},
                    {"split_ratio", c.data.split_ratio},
                    {"window", c.data.window}}},
      {"network", Json{{"population", n.population},
                       {"price_range", range_json(n.price_range)},
                       {"weight_range", range_json(n.weight_range)},
                       {"hidden", n.hidden},
                       {"timesteps", n.timesteps},
                       {"v_th", n.v_th},
                       {"d_c", n.d_c},
                       {"d_v", n.d_v},
                       {"eps", n.eps},
                       {"encoding", n.encoding == EncodingMode::Deterministic ? "deterministic"
                                                                              : "probabilistic"}}},
      {"training", Json{{"learning_rate", t.learning_rate},
                        {"batch_size", t.batch_size},
                        {"steps", t.steps},
                        {"episode_length", t.episode_length},
                        {"seed", t.seed},
                        {"optimizer", t.optimizer == OptimizerRule::Adam ? "adam" : "sgd"},
                        {"clip_norm", t.clip_norm},
                        {"checkpoint_every", t.checkpoint_every},
                        {"surrogate_amplitude", t.surrogate_amplitude},
                        {"surrogate_window", t.surrogate_window},
                        {"threads", t.threads}}},
      {"reward", Json{{"commission", c.reward.commission}, {"risk_free", c.reward.risk_free}}},
      {"quantize", Json{{"w_max", c.quantize.w_max}}},
      {"output_dir", c.output_dir.string()}};
  return j.dump(2) + "\n";
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = root ^ h;  // splitmix64 finaliser
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.batch_size = c.training.batch_size;
  t.steps = c.training.steps;
  t.episode_length = c.training.episode_length;
  t.window = c.data.window;
  t.seed = derive_seed(c.training.seed, "sampling");
  t.clip_norm = c.training.clip_norm;
  t.surrogate = {c.training.surrogate_amplitude, c.training.surrogate_window};
  t.threads = c.training.threads;
  return t;
}

OptimizerState optimizer_config(const RunConfig& c) {
  OptimizerState o;
  o.rule = c.training.optimizer;
  o.learning_rate = c.training.learning_rate;
  return o;
}

SdpNetwork initial_network(const RunConfig& c, std::size_t assets) {
  const auto& n = c.network;
  PopulationCoder coder = market_coder(assets, c.data.window, n.population, n.price_range,
                                       n.weight_range, n.eps, n.encoding);
  return init_network(std::move(coder), n.hidden, assets + 1, LifConstants{n.v_th, n.d_c, n.d_v},
                      n.timesteps, derive_seed(c.training.seed, "init"));
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) == 1,
          ErrorCode::IoError, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

}  // namespace sdp

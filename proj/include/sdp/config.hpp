#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdp/portfolio_env.hpp"
#include "sdp/quantizer.hpp"
#include "sdp/remote.hpp"
#include "sdp/snn_core.hpp"
#include "sdp/stbp.hpp"

namespace sdp {

struct CsvSource {
  std::string symbol;
  std::filesystem::path path;

  bool operator==(const CsvSource&) const = default;
};

struct FetchSource {
  std::string url_template;
  std::vector<std::string> pairs;
  std::int64_t start = 0;
  std::int64_t end = 0;
  FieldNames fields;
  std::int64_t min_delay_ms = 1000;

  bool operator==(const FetchSource&) const = default;
};

struct DataSection {
  std::vector<CsvSource> csv;
  std::optional<FetchSource> fetch;
  std::int64_t period = 1800;
  std::size_t universe_size = 11;
  std::size_t lookback = 1440;  // 30 days of half-hour candles
  std::size_t min_columns = 100;
  double split_ratio = 0.8;
  std::size_t window = 1;

  bool operator==(const DataSection&) const = default;
};

struct NetworkSection {
  std::size_t population = 10;
  FeatureRange price_range{0.5, 1.5, 0.0};
  FeatureRange weight_range{0.0, 1.0, 0.0};
  std::vector<std::size_t> hidden{128, 128};
  std::size_t timesteps = 5;
  double v_th = 0.5;
  double d_c = 0.5;
  double d_v = 0.8;
  double eps = 0.01;
  EncodingMode encoding = EncodingMode::Deterministic;

  bool operator==(const NetworkSection&) const = default;
};

struct TrainingSection {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t steps = 1000;
  std::size_t episode_length = 50;
  std::uint64_t seed = 42;
  OptimizerRule optimizer = OptimizerRule::Adam;
  double clip_norm = 10.0;
  std::size_t checkpoint_every = 500;
  double surrogate_amplitude = 9.0;
  double surrogate_window = 0.4;
  std::size_t threads = 1;

  bool operator==(const TrainingSection&) const = default;
};

struct QuantizeSection {
  std::int32_t w_max = kLoihiWeightMax;

  bool operator==(const QuantizeSection&) const = default;
};

struct RunConfig {
  DataSection data;
  NetworkSection network;
  TrainingSection training;
  RewardConfig reward;
  QuantizeSection quantize;
  std::filesystem::path output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Parses JSON config text. Relative CSV paths resolve against `base_dir`.
/// Unknown keys and out-of-range values raise ConfigError. A run manifest is
/// accepted as well; its embedded config is used.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Effective config with every field spelled out.
std::string dump_config(const RunConfig& config);

void validate(const RunConfig& config);

/// Named sub-seed derived from the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

TrainConfig train_config(const RunConfig& config);
OptimizerState optimizer_config(const RunConfig& config);

/// Network initialised from the config's network section and root seed.
SdpNetwork initial_network(const RunConfig& config, std::size_t assets);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace sdp

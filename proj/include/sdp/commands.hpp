#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdp/config.hpp"
#include "sdp/metrics.hpp"
#include "sdp/quantizer.hpp"
#include "sdp/remote.hpp"

namespace sdp {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCacheRootEnv = "SDP_CACHE_ROOT";

/// Files produced under the output directory.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path frame() const { return root / "frame.csv"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path checkpoint() const { return root / "checkpoint.json"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path train_log() const { return root / "train_log.jsonl"; }
  std::filesystem::path backtest() const { return root / "backtest"; }
  std::filesystem::path quantized() const { return root / "quantized.json"; }
  std::filesystem::path divergence() const { return root / "divergence.json"; }
  std::filesystem::path bench() const { return root / "bench.json"; }
  std::filesystem::path manifest(const std::string& command) const {
    return root / ("manifest_" + command + ".json");
  }
};

/// Resolved config, seeds, input digests and tool version, written before a
/// command does any work.
void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::filesystem::path& out);

struct IngestOptions {
  HttpGet transport;  // defaults to real HTTP
  std::filesystem::path cache_root;  // empty: $SDP_CACHE_ROOT or <out>/cache
};

struct IngestResult {
  MarketFrame frame;
  std::size_t boundary = 0;
  std::size_t network_calls = 0;
};

IngestResult cmd_ingest(const RunConfig& config, const std::filesystem::path& out,
                        const IngestOptions& options = {});

/// The ingested frame and its train/backtest boundary.
DatasetSplit load_ingested(const RunConfig& config, const std::filesystem::path& out);

struct TrainSummary {
  std::vector<TrainRecord> history;
  std::filesystem::path checkpoint;
};

TrainSummary cmd_train(const RunConfig& config, const std::filesystem::path& out);

std::vector<BacktestReport> cmd_backtest(const RunConfig& config, const std::filesystem::path& out,
                                         const std::filesystem::path& checkpoint,
                                         const std::vector<std::string>& strategies);

DivergenceReport cmd_quantize(const RunConfig& config, const std::filesystem::path& out,
                              const std::filesystem::path& checkpoint);

struct BenchRow {
  std::string mode;
  std::size_t samples = 0;
  double inferences_per_second = 0.0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double p99_us = 0.0;
};

struct BenchReport {
  std::size_t timesteps = 0;
  double duration_seconds = 0.0;
  std::vector<BenchRow> rows;
};

/// Times `run_once` back to back for `duration_seconds`; an inference that
/// finishes after the deadline is not counted. Throws InsufficientSamples
/// when none complete.
BenchRow measure_latency(const std::string& mode, const std::function<void(std::size_t)>& run_once,
                         double duration_seconds);

/// Single-threaded float and quantized inference benchmark.
BenchReport bench(const SdpNetwork& net, std::int32_t w_max, std::span<const StateVector> states,
                  double duration_seconds);

std::string bench_json(const BenchReport& report);

BenchReport cmd_bench(const RunConfig& config, const std::filesystem::path& out,
                      const std::filesystem::path& checkpoint, double duration_seconds);

/// States the float policy visits while backtesting `frame`; the inputs used
/// by quantize and bench.
std::vector<StateVector> backtest_states(const SdpNetwork& net, const MarketFrame& frame,
                                         const RewardConfig& reward, std::size_t window);

}  // namespace sdp

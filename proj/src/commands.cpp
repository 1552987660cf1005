#include "sdp/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <set>

#include "sdp/checkpoint.hpp"
#include "sdp/error.hpp"

namespace sdp {

using Json = nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path resolve_cache_root(const IngestOptions& options, const std::filesystem::path& out) {
  if (!options.cache_root.empty()) return options.cache_root;
  if (const char* env = std::getenv(kCacheRootEnv); env && *env) return env;
  return out / "cache";
}

std::filesystem::path checkpoint_or_default(const std::filesystem::path& checkpoint,
                                            const std::filesystem::path& out) {
  return checkpoint.empty() ? OutputLayout{out}.checkpoint() : checkpoint;
}

}  // namespace

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::filesystem::path& out) {
  Json digests = Json::object();
  for (const auto& p : inputs)
    digests[p.string()] = std::filesystem::exists(p) ? Json(sha256_file(p)) : Json(nullptr);
  const auto root = config.training.seed;
  Json j{{"tool", "sdp"},
         {"version", kToolVersion},
         {"command", command},
         {"created_utc", utc_now()},
         {"seeds", Json{{"root", root},
                        {"init", derive_seed(root, "init")},
                        {"sampling", derive_seed(root, "sampling")}}},
         {"inputs", std::move(digests)},
         {"config", Json::parse(dump_config(config))}};
  write_text_file(OutputLayout{out}.manifest(command), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ingest

IngestResult cmd_ingest(const RunConfig& config, const std::filesystem::path& out,
                        const IngestOptions& options) {
  std::filesystem::create_directories(out);
  std::vector<std::filesystem::path> inputs;
  for (const auto& s : config.data.csv) inputs.push_back(s.path);
  write_manifest(config, "ingest", inputs, out);

  IngestResult result;
  std::vector<AssetSeries> candidates;
  for (const auto& s : config.data.csv) candidates.push_back(load_csv(s.path, config.data.period, s.symbol));
  if (config.data.fetch) {
    const auto& f = *config.data.fetch;
    RemoteFetcher fetcher(resolve_cache_root(options, out), std::chrono::milliseconds(f.min_delay_ms),
                          options.transport ? options.transport : default_http_get());
    for (const auto& pair : f.pairs) {
      FetchRequest request{f.url_template, pair, config.data.period, f.start, f.end, f.fields};
      candidates.push_back(fetcher.fetch(request));
    }
    result.network_calls = fetcher.network_calls();
  }
  require(!candidates.empty(), ErrorCode::ConfigError, "no data sources configured");

  std::set<std::string> names;
  for (const auto& c : candidates)
    require(names.insert(c.symbol).second, ErrorCode::ConfigError, "duplicate symbol " + c.symbol);

  auto universe = select_universe(candidates, config.data.universe_size, config.data.lookback);
  std::sort(universe.begin(), universe.end());
  std::vector<AssetSeries> selected;
  for (const auto& symbol : universe)
    for (const auto& c : candidates)
      if (c.symbol == symbol) selected.push_back(c);

  result.frame = align(selected, config.data.min_columns);
  const DatasetSplit parts = split(result.frame, config.data.split_ratio);
  result.boundary = parts.train.length();

  const OutputLayout layout{out};
  write_frame_csv(result.frame, layout.frame());
  Json split_doc{{"boundary_index", result.boundary},
                 {"boundary_timestamp", parts.boundary_timestamp},
                 {"train_columns", parts.train.length()},
                 {"backtest_columns", parts.backtest.length()},
                 {"symbols", result.frame.symbols()}};
  write_text_file(layout.split(), split_doc.dump(2) + "\n");
  return result;
}

DatasetSplit load_ingested(const RunConfig& config, const std::filesystem::path& out) {
  const OutputLayout layout{out};
  const MarketFrame frame = load_frame_csv(layout.frame(), config.data.period);
  Json doc;
  try {
    doc = Json::parse(read_text_file(layout.split()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad split file: ") + e.what());
  }
  const auto boundary = doc.value("boundary_index", std::size_t{0});
  require(boundary >= 1 && boundary < frame.length(), ErrorCode::ParseError, "split boundary out of range");
  return DatasetSplit{frame.slice(0, boundary), frame.slice(boundary, frame.length()),
                      frame.timestamps()[boundary]};
}

// ---------------------------------------------------------------------------
// train

TrainSummary cmd_train(const RunConfig& config, const std::filesystem::path& out) {
  const OutputLayout layout{out};
  write_manifest(config, "train", {layout.frame(), layout.split()}, out);
  const DatasetSplit data = load_ingested(config, out);

  SdpNetwork net = initial_network(config, data.train.assets());
  OptimizerState opt = optimizer_config(config);
  const TrainConfig tcfg = train_config(config);

  std::ofstream log(layout.train_log(), std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(log), ErrorCode::IoError, "cannot write " + layout.train_log().string());

  TrainCallbacks callbacks;
  callbacks.on_step = [&log](const TrainRecord& r) {
    Json line{{"step", r.step}, {"mean_reward", r.mean_reward}, {"loss", -r.mean_reward},
              {"gradient_norm", r.gradient_norm}};
    log << line.dump() << '\n';
  };
  const std::size_t every = config.training.checkpoint_every;
  callbacks.on_update = [&](std::size_t s, const SdpNetwork& n, const OptimizerState& o) {
    if (every == 0 || s % every != 0) return;
    char name[32];
    std::snprintf(name, sizeof(name), "step_%06zu.json", s);
    save_checkpoint(layout.checkpoints() / name, n, &o);
  };

  TrainSummary summary;
  if (tcfg.steps > 0) summary.history = train(net, data.train, tcfg, config.reward, opt, callbacks).history;
  log.close();
  save_checkpoint(layout.checkpoint(), net, &opt);
  summary.checkpoint = layout.checkpoint();
  return summary;
}

// ---------------------------------------------------------------------------
// backtest

std::vector<BacktestReport> cmd_backtest(const RunConfig& config, const std::filesystem::path& out,
                                         const std::filesystem::path& checkpoint,
                                         const std::vector<std::string>& strategies) {
  const OutputLayout layout{out};
  require(!strategies.empty(), ErrorCode::InvalidArgument, "no strategies requested");
  for (const auto& s : strategies)
    require(s == "sdp" || s == "ucrp" || s == "best_stock", ErrorCode::InvalidArgument,
            "unknown strategy " + s + " (expected sdp, ucrp, best_stock)");
  const bool needs_net = std::find(strategies.begin(), strategies.end(), "sdp") != strategies.end();
  const auto checkpoint_path = checkpoint_or_default(checkpoint, out);

  std::vector<std::filesystem::path> inputs{layout.frame(), layout.split()};
  if (needs_net) inputs.push_back(checkpoint_path);
  write_manifest(config, "backtest", inputs, out);

  const DatasetSplit data = load_ingested(config, out);
  const MarketFrame& frame = data.backtest;
  const BacktestOptions options{config.data.window};

  std::optional<SdpNetwork> net;
  if (needs_net) net = load_checkpoint(checkpoint_path).network;

  std::vector<BacktestReport> reports;
  for (const auto& s : strategies) {
    Policy policy;
    if (s == "sdp")
      policy = sdp_policy(*net);
    else if (s == "ucrp")
      policy = ucrp_policy(frame.assets());
    else
      policy = best_stock_policy(frame);
    reports.push_back(backtest(s, policy, frame, config.reward, options));
    write_report(reports.back(), layout.backtest());
  }
  write_text_file(layout.backtest() / "comparison.json", comparison_json(reports));
  write_text_file(layout.backtest() / "comparison.txt", comparison_text(reports));
  return reports;
}

// ---------------------------------------------------------------------------
// quantize

std::vector<StateVector> backtest_states(const SdpNetwork& net, const MarketFrame& frame,
                                         const RewardConfig& reward, std::size_t window) {
  std::vector<StateVector> states;
  const Policy recording = [&](const StateVector& state, std::size_t) {
    states.push_back(state);
    return infer(net, state);
  };
  backtest("probe", recording, frame, reward, BacktestOptions{window});
  return states;
}

DivergenceReport cmd_quantize(const RunConfig& config, const std::filesystem::path& out,
                              const std::filesystem::path& checkpoint) {
  const OutputLayout layout{out};
  const auto checkpoint_path = checkpoint_or_default(checkpoint, out);
  write_manifest(config, "quantize", {checkpoint_path, layout.frame(), layout.split()}, out);

  const SdpNetwork net = load_checkpoint(checkpoint_path).network;
  const QuantizedNetwork qnet = quantize(net, config.quantize.w_max);
  const DatasetSplit data = load_ingested(config, out);
  const auto states = backtest_states(net, data.backtest, config.reward, config.data.window);
  const DivergenceReport report = compare(net, qnet, states);

  save_quantized(layout.quantized(), qnet);
  write_text_file(layout.divergence(), divergence_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// bench

BenchRow measure_latency(const std::string& mode, const std::function<void(std::size_t)>& run_once,
                         double duration_seconds) {
  using Clock = std::chrono::steady_clock;
  const auto begin = Clock::now();
  const auto deadline =
      begin + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(
                  std::max(0.0, duration_seconds)));
  std::vector<double> latencies;
  auto last = begin;
  for (std::size_t i = 0;; ++i) {
    const auto start = Clock::now();
    if (start >= deadline) break;
    run_once(i);
    const auto stop = Clock::now();
    if (stop > deadline) break;
    latencies.push_back(std::chrono::duration<double, std::micro>(stop - start).count());
    last = stop;
  }
  require(!latencies.empty(), ErrorCode::InsufficientSamples,
          mode + ": no inference completed within " + format_double(duration_seconds) + " s");

  BenchRow row;
  row.mode = mode;
  row.samples = latencies.size();
  const double elapsed = std::chrono::duration<double>(last - begin).count();
  row.inferences_per_second = static_cast<double>(latencies.size()) / elapsed;
  double total = 0.0;
  for (double l : latencies) total += l;
  row.mean_us = total / static_cast<double>(latencies.size());
  std::sort(latencies.begin(), latencies.end());
  const auto rank = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(latencies.size())));
    return latencies[std::min(latencies.size() - 1, idx == 0 ? 0 : idx - 1)];
  };
  row.median_us = rank(0.5);
  row.p99_us = rank(0.99);
  return row;
}

BenchReport bench(const SdpNetwork& net, std::int32_t w_max, std::span<const StateVector> states,
                  double duration_seconds) {
  require(!states.empty(), ErrorCode::InvalidArgument, "bench needs at least one state");
  const QuantizedNetwork qnet = quantize(net, w_max);
  BenchReport report;
  report.timesteps = net.timesteps;
  report.duration_seconds = duration_seconds;
  volatile double sink = 0.0;
  report.rows.push_back(measure_latency(
      "float", [&](std::size_t i) { sink = sink + infer(net, states[i % states.size()]).weights[0]; },
      duration_seconds));
  report.rows.push_back(measure_latency(
      "quantized",
      [&](std::size_t i) { sink = sink + infer_quantized(qnet, states[i % states.size()]).weights[0]; },
      duration_seconds));
  return report;
}

std::string bench_json(const BenchReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows)
    rows.push_back(Json{{"mode", r.mode},
                        {"samples", r.samples},
                        {"inferences_per_second", r.inferences_per_second},
                        {"mean_us", r.mean_us},
                        {"median_us", r.median_us},
                        {"p99_us", r.p99_us}});
  Json j{{"timesteps", report.timesteps},
         {"duration_seconds", report.duration_seconds},
         {"threads", 1},
         {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

BenchReport cmd_bench(const RunConfig& config, const std::filesystem::path& out,
                      const std::filesystem::path& checkpoint, double duration_seconds) {
  const OutputLayout layout{out};
  const auto checkpoint_path = checkpoint_or_default(checkpoint, out);
  write_manifest(config, "bench", {checkpoint_path, layout.frame(), layout.split()}, out);
  const SdpNetwork net = load_checkpoint(checkpoint_path).network;

  std::vector<StateVector> states;
  if (std::filesystem::exists(layout.frame()) && std::filesystem::exists(layout.split())) {
    const DatasetSplit data = load_ingested(config, out);
    states = backtest_states(net, data.backtest, config.reward, config.data.window);
  } else {
    // Neutral state: flat candles, all cash.
    const std::size_t m = net.actions() - 1;
    StateVector s;
    s.values.assign(net.coder.dims(), 1.0);
    std::fill(s.values.end() - static_cast<std::ptrdiff_t>(m + 1), s.values.end(), 0.0);
    s.values[s.values.size() - (m + 1)] = 1.0;
    states.push_back(std::move(s));
  }
  const BenchReport report = bench(net, config.quantize.w_max, states, duration_seconds);
  write_text_file(layout.bench(), bench_json(report));
  return report;
}

}  // namespace sdp

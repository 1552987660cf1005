// sdp: command-line front end for the spiking portfolio policy pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "sdp/commands.hpp"
#include "sdp/error.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void diagnostic(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking deterministic policy for portfolio management"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string checkpoint;
  std::string strategies = "sdp,ucrp,best_stock";
  double duration = 5.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config or a run manifest")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
  };

  auto* ingest = app.add_subcommand("ingest", "load or fetch candles, align, split");
  add_common(ingest);
  auto* train = app.add_subcommand("train", "train the spiking policy on the training split");
  add_common(train);
  auto* backtest = app.add_subcommand("backtest", "evaluate strategies on the back-test split");
  add_common(backtest);
  backtest->add_option("--checkpoint", checkpoint, "float checkpoint (default <out>/checkpoint.json)");
  backtest->add_option("--strategies", strategies, "comma list of sdp, ucrp, best_stock");
  auto* quantize = app.add_subcommand("quantize", "rescale to integer weights and report divergence");
  add_common(quantize);
  quantize->add_option("--checkpoint", checkpoint, "float checkpoint (default <out>/checkpoint.json)");
  auto* bench = app.add_subcommand("bench", "measure float and quantized inference throughput");
  add_common(bench);
  bench->add_option("--checkpoint", checkpoint, "float checkpoint (default <out>/checkpoint.json)");
  bench->add_option("--duration", duration, "seconds per mode");
  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");
  config_cmd->add_option("--config", config_path, "JSON run config (defaults when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    sdp::RunConfig config = config_path.empty() ? sdp::RunConfig{} : sdp::load_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    const std::filesystem::path out = config.output_dir;

    if (config_cmd->parsed()) {
      std::cout << sdp::dump_config(config);
    } else if (ingest->parsed()) {
      const auto r = sdp::cmd_ingest(config, out);
      std::cout << "ingested " << r.frame.assets() << " assets x " << r.frame.length()
                << " periods; train " << r.boundary << ", backtest "
                << r.frame.length() - r.boundary << "\n";
    } else if (train->parsed()) {
      const auto r = sdp::cmd_train(config, out);
      if (!r.history.empty())
        std::cout << "trained " << r.history.size() << " steps; final mean reward "
                  << r.history.back().mean_reward << "\n";
      std::cout << "checkpoint: " << r.checkpoint.string() << "\n";
    } else if (backtest->parsed()) {
      const auto reports = sdp::cmd_backtest(config, out, checkpoint, split_list(strategies));
      std::cout << sdp::comparison_text(reports);
    } else if (quantize->parsed()) {
      const auto r = sdp::cmd_quantize(config, out, checkpoint);
      std::cout << "states " << r.states.size() << ", mean L1 action gap " << r.mean_action_l1
                << ", max " << r.max_action_l1 << "\n";
    } else if (bench->parsed()) {
      const auto r = sdp::cmd_bench(config, out, checkpoint, duration);
      std::printf("%-10s %10s %12s %12s %12s\n", "mode", "Inf/s", "mean_us", "median_us", "p99_us");
      for (const auto& row : r.rows)
        std::printf("%-10s %10.1f %12.2f %12.2f %12.2f\n", row.mode.c_str(),
                    row.inferences_per_second, row.mean_us, row.median_us, row.p99_us);
    }
  } catch (const sdp::Error& e) {
    diagnostic(std::string(sdp::to_string(e.code())), e.what());
    return sdp::exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    diagnostic("IoError", e.what());
    return sdp::exit_code(sdp::ErrorCode::IoError);
  } catch (const std::exception& e) {
    diagnostic("Internal", e.what());
    return 1;
  }
  return 0;
}

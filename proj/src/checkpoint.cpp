#include "sdp/checkpoint.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sdp/error.hpp"

namespace sdp {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "sdp-checkpoint";

template <typename T>
Json matrix_json(const Matrix<T>& m) {
  return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

template <typename T>
Matrix<T> matrix_from(const Json& j) {
  Matrix<T> m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<T>>();
  require(m.data.size() == m.rows * m.cols, ErrorCode::ParseError, "matrix data size mismatch");
  return m;
}

Json coder_json(const PopulationCoder& c) {
  Json ranges = Json::array();
  for (const auto& r : c.ranges()) ranges.push_back(Json::array({r.lo, r.hi, r.sigma}));
  return Json{{"population", c.population()},
              {"eps", c.eps()},
              {"mode", c.mode() == EncodingMode::Deterministic ? "deterministic" : "probabilistic"},
              {"ranges", std::move(ranges)}};
}

PopulationCoder coder_from(const Json& j) {
  std::vector<FeatureRange> ranges;
  for (const auto& r : j.at("ranges")) {
    require(r.is_array() && r.size() == 3, ErrorCode::ParseError, "bad coder range entry");
    ranges.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>()});
  }
  const auto mode = j.at("mode").get<std::string>();
  require(mode == "deterministic" || mode == "probabilistic", ErrorCode::ParseError,
          "unknown encoding mode " + mode);
  return PopulationCoder(std::move(ranges), j.at("population").get<std::size_t>(),
                         j.at("eps").get<double>(),
                         mode == "deterministic" ? EncodingMode::Deterministic
                                                 : EncodingMode::Probabilistic);
}

Json decoder_json(const DecoderParams& d) {
  return Json{{"weights", matrix_json(d.weights)}, {"bias", d.bias}};
}

DecoderParams decoder_from(const Json& j) {
  DecoderParams d;
  d.weights = matrix_from<double>(j.at("weights"));
  d.bias = j.at("bias").get<std::vector<double>>();
  return d;
}

Json gradients_json(const GradientSet& g) {
  Json layers = Json::array();
  for (const auto& l : g.layers)
    layers.push_back(Json{{"weights", matrix_json(l.weights)}, {"bias", l.bias}});
  return Json{{"layers", std::move(layers)},
              {"decoder_weights", matrix_json(g.decoder_weights)},
              {"decoder_bias", g.decoder_bias}};
}

GradientSet gradients_from(const Json& j) {
  GradientSet g;
  for (const auto& l : j.at("layers"))
    g.layers.push_back({matrix_from<double>(l.at("weights")), l.at("bias").get<std::vector<double>>()});
  g.decoder_weights = matrix_from<double>(j.at("decoder_weights"));
  g.decoder_bias = j.at("decoder_bias").get<std::vector<double>>();
  return g;
}

Json optimizer_json(const OptimizerState& o) {
  Json j{{"rule", o.rule == OptimizerRule::Adam ? "adam" : "sgd"},
         {"learning_rate", o.learning_rate},
         {"beta1", o.beta1},
         {"beta2", o.beta2},
         {"epsilon", o.epsilon},
         {"step", o.step}};
  if (!o.first_moment.layers.empty()) {
    j["first_moment"] = gradients_json(o.first_moment);
    j["second_moment"] = gradients_json(o.second_moment);
  }
  return j;
}

OptimizerState optimizer_from(const Json& j) {
  OptimizerState o;
  const auto rule = j.at("rule").get<std::string>();
  require(rule == "adam" || rule == "sgd", ErrorCode::ParseError, "unknown optimizer " + rule);
  o.rule = rule == "adam" ? OptimizerRule::Adam : OptimizerRule::Sgd;
  o.learning_rate = j.at("learning_rate").get<double>();
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.epsilon = j.at("epsilon").get<double>();
  o.step = j.at("step").get<std::uint64_t>();
  if (j.contains("first_moment")) {
    o.first_moment = gradients_from(j.at("first_moment"));
    o.second_moment = gradients_from(j.at("second_moment"));
  }
  return o;
}

Json parse_document(const std::string& text, const char* kind) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  require(j.is_object() && j.value("format", "") == kFormat, ErrorCode::ParseError,
          "not an sdp checkpoint");
  require(j.value("version", 0) == kCheckpointVersion, ErrorCode::ParseError,
          "unsupported checkpoint version");
  require(j.value("kind", "") == kind, ErrorCode::ParseError,
          std::string("expected a ") + kind + " checkpoint");
  return j;
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace

std::string to_checkpoint_text(const SdpNetwork& net, const OptimizerState* optimizer) {
  Json layers = Json::array();
  for (const auto& l : net.layers)
    layers.push_back(Json{{"d_c", l.d_c},
                          {"d_v", l.d_v},
                          {"v_th", l.v_th},
                          {"weights", matrix_json(l.weights)},
                          {"bias", l.bias}});
  Json j{{"format", kFormat},
         {"version", kCheckpointVersion},
         {"kind", "float"},
         {"seed", net.seed},
         {"timesteps", net.timesteps},
         {"coder", coder_json(net.coder)},
         {"layers", std::move(layers)},
         {"decoder", decoder_json(net.decoder)}};
  if (optimizer) j["optimizer"] = optimizer_json(*optimizer);
  return j.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  const Json j = parse_document(text, "float");
  return guarded([&] {
    Checkpoint cp;
    cp.network.seed = j.at("seed").get<std::uint64_t>();
    cp.network.timesteps = j.at("timesteps").get<std::size_t>();
    cp.network.coder = coder_from(j.at("coder"));
    for (const auto& l : j.at("layers")) {
      LifLayerParams p;
      p.d_c = l.at("d_c").get<double>();
      p.d_v = l.at("d_v").get<double>();
      p.v_th = l.at("v_th").get<double>();
      p.weights = matrix_from<double>(l.at("weights"));
      p.bias = l.at("bias").get<std::vector<double>>();
      cp.network.layers.push_back(std::move(p));
    }
    cp.network.decoder = decoder_from(j.at("decoder"));
    if (j.contains("optimizer")) cp.optimizer = optimizer_from(j.at("optimizer"));
    validate(cp.network);
    return cp;
  });
}

std::string to_quantized_text(const QuantizedNetwork& q) {
  Json layers = Json::array();
  for (const auto& l : q.layers)
    layers.push_back(Json{{"w_max", l.w_max},
                          {"ratio", l.ratio},
                          {"d_c", l.d_c},
                          {"d_v", l.d_v},
                          {"v_th", l.v_th},
                          {"weights", matrix_json(l.weights)},
                          {"bias", l.bias}});
  Json j{{"format", kFormat},
         {"version", kCheckpointVersion},
         {"kind", "quantized"},
         {"timesteps", q.timesteps},
         {"coder", coder_json(q.coder)},
         {"layers", std::move(layers)},
         {"decoder", decoder_json(q.decoder)}};
  return j.dump(1) + "\n";
}

QuantizedNetwork parse_quantized(const std::string& text) {
  const Json j = parse_document(text, "quantized");
  return guarded([&] {
    QuantizedNetwork q;
    q.timesteps = j.at("timesteps").get<std::size_t>();
    q.coder = coder_from(j.at("coder"));
    for (const auto& l : j.at("layers")) {
      QuantizedLayer ql;
      ql.w_max = l.at("w_max").get<std::int32_t>();
      ql.ratio = l.at("ratio").get<double>();
      ql.d_c = l.at("d_c").get<double>();
      ql.d_v = l.at("d_v").get<double>();
      ql.v_th = l.at("v_th").get<std::int64_t>();
      ql.weights = matrix_from<std::int32_t>(l.at("weights"));
      ql.bias = l.at("bias").get<std::vector<std::int64_t>>();
      for (auto w : ql.weights.data)
        require(w >= -ql.w_max && w <= ql.w_max, ErrorCode::ParseError, "quantized weight out of range");
      require(ql.v_th >= 1, ErrorCode::ParseError, "quantized threshold must be >= 1");
      q.layers.push_back(std::move(ql));
    }
    q.decoder = decoder_from(j.at("decoder"));
    return q;
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const SdpNetwork& net,
                     const OptimizerState* optimizer) {
  write_text_file(path, to_checkpoint_text(net, optimizer));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

void save_quantized(const std::filesystem::path& path, const QuantizedNetwork& qnet) {
  write_text_file(path, to_quantized_text(qnet));
}

QuantizedNetwork load_quantized(const std::filesystem::path& path) {
  return parse_quantized(read_text_file(path));
}

}  // namespace sdp

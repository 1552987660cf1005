#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sdp/quantizer.hpp"
#include "sdp/snn_core.hpp"
#include "sdp/stbp.hpp"

namespace sdp {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  SdpNetwork network;
  std::optional<OptimizerState> optimizer;
};

/// Versioned JSON. Doubles are written in shortest round-trip form so a
/// save/load cycle reproduces every parameter bit-for-bit.
std::string to_checkpoint_text(const SdpNetwork& net, const OptimizerState* optimizer = nullptr);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const SdpNetwork& net,
                     const OptimizerState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string to_quantized_text(const QuantizedNetwork& qnet);
QuantizedNetwork parse_quantized(const std::string& text);

void save_quantized(const std::filesystem::path& path, const QuantizedNetwork& qnet);
QuantizedNetwork load_quantized(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sdp

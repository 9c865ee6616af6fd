#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rafsnn/layers.hpp"

namespace rafsnn {

// Binary checkpoint, all integers and floats little-endian:
//   magic "RAFSNNCK" | u32 version | u32 spec_len | spec JSON bytes |
//   u32 n_tensors | n × (u32 name_len | name | u32 rank | rank × u64 dim | f64 payload)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, Network& net);
// Rebuilds the network from the embedded spec and restores every tensor.
Network load_checkpoint(const std::filesystem::path& path);

// In-memory copy of parameter values, in Network::parameters() order.
using ParameterSnapshot = std::vector<Tensor>;
ParameterSnapshot snapshot(Network& net);
void restore(Network& net, const ParameterSnapshot& snap);

}  // namespace rafsnn

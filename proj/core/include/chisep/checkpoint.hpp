#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chisep/network.hpp"
#include "chisep/synth.hpp"

namespace chisep {

/// Checkpoint container (see docs/checkpoint.md):
///   8 bytes  magic "CHSPCKP1"
///   u32 LE   format version
///   u32 LE   JSON header length H
///   H bytes  JSON {network, norm_stats?, meta, tensors: [{name, shape, offset, count}]}
///   payload  float32 LE values; `offset` counts floats from the payload start
inline constexpr char kCheckpointMagic[8] = {'C', 'H', 'S', 'P', 'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

struct Checkpoint {
  NetworkConfig network;
  std::optional<NormStats> norm;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

template <typename T>
Checkpoint make_checkpoint(DualBranchNet<T>& net, const std::optional<NormStats>& norm, const nlohmann::json& meta);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies every tensor into `net`; names and shapes must match exactly.
template <typename T>
void load_into(const Checkpoint& ckpt, DualBranchNet<T>& net);

}  // namespace chisep

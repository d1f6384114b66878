#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "chisep/baseline.hpp"
#include "chisep/inference.hpp"
#include "chisep/metrics.hpp"
#include "chisep/network.hpp"
#include "chisep/synth.hpp"
#include "chisep/training.hpp"

namespace chisep::cli {

struct EvalConfig {
  bool brain_mask = true;  // false: metrics over the full grid
  HfenParams hfen{};
  XsimParams xsim{};

  nlohmann::json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j);
};

/// Everything a command may need. Loaded from an optional JSON file, then
/// individual flags override single fields.
struct RunConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  int phantoms = 4;
  SynthConfig synth{};
  NetworkConfig network{};
  TrainConfig train{};
  SolverConfig solver{};
  InferenceOptions inference{};
  EvalConfig eval{};

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

// Parses and validates a config file; InvalidArgument on schema errors,
// IoError when unreadable.
RunConfig load_run_config(const std::filesystem::path& path, std::string* raw_text = nullptr);

}  // namespace chisep::cli

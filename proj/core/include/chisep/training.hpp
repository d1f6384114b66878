#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chisep/checkpoint.hpp"
#include "chisep/losses.hpp"
#include "chisep/network.hpp"
#include "chisep/synth.hpp"

namespace chisep {

enum class Precision { kFloat, kDouble };
Precision parse_precision(const std::string& s);
const char* to_string(Precision p);

struct TrainConfig {
  int epochs = 20;
  // Learning rate per phase; phase boundaries at 30% and 60% of the epochs
  // unless `lr_breakpoints` lists them explicitly.
  std::vector<double> lr_values{1e-3, 1e-4, 1e-5};
  std::vector<int> lr_breakpoints;
  int batch_size = 2;
  std::uint64_t seed = 0;
  LossOptions loss{};
  bool contrastive_enabled = true;
  Precision precision = Precision::kFloat;
  double val_fraction = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool keep_epoch_checkpoints = false;  // also write checkpoint_epochNNN.ckpt

  void validate() const;
  std::vector<int> breakpoints() const;
  // Weights actually optimized: alpha forced to 0 when contrastive is off.
  LossWeights effective_weights() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown train;
  LossBreakdown val;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;

  nlohmann::json to_json() const;
  static TrainHistory from_json(const nlohmann::json& j);
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters after the last epoch
  TrainHistory history;
};

// Seed-stable train/validation split; at least one sample in each part.
void split_indices(std::size_t n, double val_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& val);

/// Physical targets (labels + de-normalized acquisition) of a sample.
PhysicalTarget physical_target(const TrainingSample& s, const NormStats& norm);

/// Adam over a parameter list; moments kept in double.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, double beta1, double beta2, double eps);
  void step(double lr);

 private:
  std::vector<Param<T>*> params_;
  std::vector<std::vector<double>> m_, v_;
  double b1_, b2_, eps_;
  long t_ = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on the manifest's samples. When `out_dir` is non-empty, writes
/// checkpoint.ckpt and history.json there after every epoch. Throws
/// NumericError naming epoch and step on a non-finite loss.
TrainResult train(const DatasetManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {}, const EpochCallback& on_epoch = {});

}  // namespace chisep

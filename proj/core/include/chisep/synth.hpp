#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chisep/phantoms.hpp"

namespace chisep {

/// Sliding-window origins along each axis: 0, s, 2s, ... while the window
/// fits, plus one edge-aligned origin if the lattice misses the far border.
/// Every voxel is covered by at least one window.
std::vector<int> crop_origins_1d(int length, int window, int stride);
std::vector<Index3> crop_patches(const Dims& dims, const Dims& window, const Index3& stride);

// Input channel order, fixed for storage and for the network.
enum Channel : int { kR2Prime = 0, kLocalField = 1, kQsm = 2 };
inline constexpr std::array<const char*, 3> kChannelNames{"r2_prime", "local_field", "qsm"};

/// Dataset-wise per-channel statistics of the input patches.
struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  void validate() const;
  double normalize(int channel, double v) const noexcept { return (v - mean[channel]) / std[channel]; }
  double denormalize(int channel, double v) const noexcept { return v * std[channel] + mean[channel]; }
  nlohmann::json to_json() const;
  static NormStats from_json(const nlohmann::json& j);
};

struct SynthConfig {
  Dims phantom_dims{64, 64, 64};
  VoxelSize voxel{};
  Dims window{32, 32, 32};
  Index3 stride{32, 32, 32};
  PhantomConfig phantom{};
  LesionConfig lesions{};
  bool lesion_augmentation = true;
  double noise_sigma = 0.0;  // Gaussian noise on synthesized inputs, in channel units; 0 = off
  int jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SampleRecord {
  std::string dir;  // relative to the manifest directory
  int phantom = 0;
  Index3 origin{0, 0, 0};
  bool lesioned = false;
};

struct DatasetManifest {
  int version = 1;
  std::uint64_t seed = 0;
  int n_phantoms = 0;
  Dims window{};
  Index3 stride{};
  NormStats norm{};
  SynthConfig config{};
  std::vector<SampleRecord> samples;
  std::filesystem::path root;  // directory holding manifest.json; not serialized

  nlohmann::json to_json() const;
};

/// In-memory training sample: normalized inputs and physical labels.
struct TrainingSample {
  std::array<Volume3D, 3> inputs;  // normalized, channel order r2_prime, local_field, qsm
  Volume3D label_pos;
  Volume3D label_neg;
  Volume3D a_patch;
  MaskVolume mask;
  Index3 origin{0, 0, 0};
  bool lesioned = false;
};

/// Generates `n_phantoms` phantoms, crops patches, synthesizes inputs per
/// patch with the forward model (clean copy and lesion-augmented copy),
/// normalizes with dataset statistics and writes
///   out_dir/manifest.json
///   out_dir/samples/sNNNNN/{r2_prime,local_field,qsm,chi_pos,chi_neg,a_map,mask}.svol
/// Output is a function of (seed, config) only.
DatasetManifest build_training_set(int n_phantoms, std::uint64_t seed, const SynthConfig& cfg,
                                   const std::filesystem::path& out_dir);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
// Validates that every sample file exists.
DatasetManifest read_manifest(const std::filesystem::path& path);

TrainingSample load_sample(const DatasetManifest& m, std::size_t index);

// Physical (de-normalized) acquisition for a sample, for physics losses.
AcquisitionSet sample_acquisition(const TrainingSample& s, const NormStats& norm);

}  // namespace chisep

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chisep {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Voxel size in mm.
struct VoxelSize {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  double operator[](int axis) const noexcept { return axis == 0 ? dx : (axis == 1 ? dy : dz); }
  friend bool operator==(const VoxelSize&, const VoxelSize&) = default;
};

// Integer voxel coordinate (i, j, k) on a grid.
using Index3 = std::array<int, 3>;

std::string to_string(const Dims& d);

// Throws InvalidArgument unless every dim >= 1 and every voxel size is finite and > 0.
void validate_grid(const Dims& dims, const VoxelSize& voxel);

// Linear index with x fastest: i + nx * (j + ny * k).
inline std::size_t linear_index(const Dims& d, int i, int j, int k) noexcept {
  return static_cast<std::size_t>(i) +
         static_cast<std::size_t>(d.nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(d.ny) * static_cast<std::size_t>(k));
}

/// Scalar 3D grid. B0 is always along the third axis (z).
///
/// Values are doubles in memory; on disk they are float32 (.svol). `units` is
/// a free-form tag ("ppm", "1/s", "1/(s*ppm)", ...) carried through I/O.
class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(Dims dims, VoxelSize voxel, double fill = 0.0, std::string units = {});
  Volume3D(Dims dims, VoxelSize voxel, std::vector<double> data, std::string units = {});

  const Dims& dims() const noexcept { return dims_; }
  const VoxelSize& voxel_size() const noexcept { return voxel_; }
  const std::string& units() const noexcept { return units_; }
  void set_units(std::string u) { units_ = std::move(u); }

  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t idx) const noexcept { return data_[idx]; }
  double& operator[](std::size_t idx) noexcept { return data_[idx]; }
  double at(int i, int j, int k) const noexcept { return data_[linear_index(dims_, i, j, k)]; }
  double& at(int i, int j, int k) noexcept { return data_[linear_index(dims_, i, j, k)]; }

  double sum() const noexcept;
  bool all_finite() const noexcept;
  bool same_grid(const Volume3D& other) const noexcept {
    return dims_ == other.dims_ && voxel_ == other.voxel_;
  }

 private:
  Dims dims_{};
  VoxelSize voxel_{};
  std::vector<double> data_;
  std::string units_;
};

// Binary mask on a grid. Cropped masks may be empty; operations that need
// voxels call `require_nonempty`.
class MaskVolume {
 public:
  MaskVolume() = default;
  MaskVolume(Dims dims, VoxelSize voxel, bool fill = false);
  MaskVolume(Dims dims, VoxelSize voxel, std::vector<std::uint8_t> data);

  const Dims& dims() const noexcept { return dims_; }
  const VoxelSize& voxel_size() const noexcept { return voxel_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  bool operator[](std::size_t idx) const noexcept { return data_[idx] != 0; }
  void set(std::size_t idx, bool v) noexcept { data_[idx] = v ? 1 : 0; }
  bool at(int i, int j, int k) const noexcept { return data_[linear_index(dims_, i, j, k)] != 0; }

  std::size_t count() const noexcept;
  void require_nonempty(const char* what) const;
  Volume3D to_volume() const;
  static MaskVolume from_volume(const Volume3D& v, double threshold = 0.5);

 private:
  Dims dims_{};
  VoxelSize voxel_{};
  std::vector<std::uint8_t> data_;
};

Volume3D create_volume(Dims dims, VoxelSize voxel, double fill);

// Throws InvalidArgument naming `what` if grids differ.
void require_same_grid(const Volume3D& a, const Volume3D& b, const char* what);
void require_same_grid(const Volume3D& a, const MaskVolume& m, const char* what);

// Sub-block [origin, origin + size) of a volume / mask.
Volume3D crop(const Volume3D& v, const Index3& origin, const Dims& size);
MaskVolume crop(const MaskVolume& m, const Index3& origin, const Dims& size);

}  // namespace chisep

#include "chisep/volume.hpp"

#include <algorithm>
#include <cmath>

#include "chisep/errors.hpp"

namespace chisep {

std::string to_string(const Dims& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" + std::to_string(d.nz);
}

void validate_grid(const Dims& dims, const VoxelSize& voxel) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
    throw InvalidArgument("non-positive grid dimension " + to_string(dims));
  }
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(voxel[a]) || voxel[a] <= 0.0) {
      throw InvalidArgument("voxel size must be finite and > 0");
    }
  }
}

Volume3D::Volume3D(Dims dims, VoxelSize voxel, double fill, std::string units)
    : dims_(dims), voxel_(voxel), units_(std::move(units)) {
  validate_grid(dims, voxel);
  if (!std::isfinite(fill)) throw InvalidArgument("non-finite fill value");
  data_.assign(dims.count(), fill);
}

Volume3D::Volume3D(Dims dims, VoxelSize voxel, std::vector<double> data, std::string units)
    : dims_(dims), voxel_(voxel), data_(std::move(data)), units_(std::move(units)) {
  validate_grid(dims, voxel);
  if (data_.size() != dims.count()) {
    throw InvalidArgument("data length " + std::to_string(data_.size()) + " does not match dims " +
                          to_string(dims));
  }
  if (!all_finite()) throw InvalidArgument("volume contains non-finite values");
}

double Volume3D::sum() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Volume3D::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

MaskVolume::MaskVolume(Dims dims, VoxelSize voxel, bool fill) : dims_(dims), voxel_(voxel) {
  validate_grid(dims, voxel);
  data_.assign(dims.count(), fill ? 1 : 0);
}

MaskVolume::MaskVolume(Dims dims, VoxelSize voxel, std::vector<std::uint8_t> data)
    : dims_(dims), voxel_(voxel), data_(std::move(data)) {
  validate_grid(dims, voxel);
  if (data_.size() != dims.count()) throw InvalidArgument("mask length does not match dims");
  for (auto& b : data_) b = b ? 1 : 0;
}

std::size_t MaskVolume::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

void MaskVolume::require_nonempty(const char* what) const {
  if (count() == 0) throw InvalidArgument(std::string(what) + ": mask is empty");
}

Volume3D MaskVolume::to_volume() const {
  std::vector<double> d(data_.begin(), data_.end());
  return Volume3D(dims_, voxel_, std::move(d));
}

MaskVolume MaskVolume::from_volume(const Volume3D& v, double threshold) {
  std::vector<std::uint8_t> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] > threshold ? 1 : 0;
  return MaskVolume(v.dims(), v.voxel_size(), std::move(d));
}

Volume3D create_volume(Dims dims, VoxelSize voxel, double fill) { return Volume3D(dims, voxel, fill); }

void require_same_grid(const Volume3D& a, const Volume3D& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw InvalidArgument(std::string(what) + ": dims " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  if (a.voxel_size() != b.voxel_size()) throw InvalidArgument(std::string(what) + ": voxel sizes differ");
}

void require_same_grid(const Volume3D& a, const MaskVolume& m, const char* what) {
  if (a.dims() != m.dims()) {
    throw InvalidArgument(std::string(what) + ": mask dims " + to_string(m.dims()) + " vs volume " +
                          to_string(a.dims()));
  }
  if (a.voxel_size() != m.voxel_size()) throw InvalidArgument(std::string(what) + ": mask voxel size differs");
}

namespace {

void check_crop(const Dims& full, const Index3& origin, const Dims& size) {
  for (int a = 0; a < 3; ++a) {
    if (origin[a] < 0 || size[a] < 1 || origin[a] + size[a] > full[a]) {
      throw InvalidArgument("crop window out of bounds for grid " + to_string(full));
    }
  }
}

template <typename Src, typename Dst>
void copy_block(const Src& src, const Dims& full, const Index3& o, const Dims& size, Dst& dst) {
  std::size_t out = 0;
  for (int k = 0; k < size.nz; ++k)
    for (int j = 0; j < size.ny; ++j) {
      std::size_t in = linear_index(full, o[0], o[1] + j, o[2] + k);
      for (int i = 0; i < size.nx; ++i) dst[out++] = src[in + static_cast<std::size_t>(i)];
    }
}

}  // namespace

Volume3D crop(const Volume3D& v, const Index3& origin, const Dims& size) {
  check_crop(v.dims(), origin, size);
  std::vector<double> d(size.count());
  copy_block(v.data(), v.dims(), origin, size, d);
  return Volume3D(size, v.voxel_size(), std::move(d), v.units());
}

MaskVolume crop(const MaskVolume& m, const Index3& origin, const Dims& size) {
  check_crop(m.dims(), origin, size);
  std::vector<std::uint8_t> d(size.count());
  copy_block(m.data(), m.dims(), origin, size, d);
  return MaskVolume(size, m.voxel_size(), std::move(d));
}

}  // namespace chisep

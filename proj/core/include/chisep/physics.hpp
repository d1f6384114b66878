#pragma once

#include <array>
#include <vector>

#include "chisep/volume.hpp"

namespace chisep {

/// Paramagnetic / diamagnetic source volumes in ppm.
///
/// Sign convention: chi_neg is stored as signed non-positive values, so the
/// net susceptibility is chi_pos + chi_neg and the absolute content is
/// chi_pos - chi_neg. Network outputs are not sign-constrained, so the type
/// itself doesn't enforce signs; `checked` does.
struct SourcePair {
  Volume3D chi_pos;
  Volume3D chi_neg;

  static SourcePair checked(Volume3D pos, Volume3D neg);
  static SourcePair zeros(Dims dims, VoxelSize voxel);

  bool satisfies_sign_convention() const noexcept;
  const Dims& dims() const noexcept { return chi_pos.dims(); }
  const VoxelSize& voxel_size() const noexcept { return chi_pos.voxel_size(); }
  Volume3D net() const;       // chi_pos + chi_neg
  Volume3D absolute() const;  // chi_pos - chi_neg
};

// Voxel-wise decay kernel A in 1/(s*ppm); non-negative and finite.
class DecayKernelMap {
 public:
  DecayKernelMap() = default;
  explicit DecayKernelMap(Volume3D a_map);
  const Volume3D& volume() const noexcept { return a_; }
  double operator[](std::size_t i) const noexcept { return a_[i]; }

 private:
  Volume3D a_;
};

/// The three network inputs plus the decay-kernel map and brain mask.
struct AcquisitionSet {
  Volume3D local_field;  // ppm
  Volume3D r2_prime;     // 1/s
  Volume3D qsm;          // ppm
  DecayKernelMap a_map;
  MaskVolume mask;

  const Dims& dims() const noexcept { return qsm.dims(); }
  void validate() const;
};

/// Real spectral dipole kernel D(k) = 1/3 - kz^2/|k|^2 on the FFT grid of
/// `dims`, with D(0) = 0. Frequencies follow the usual DFT ordering scaled by
/// 1/(n * voxel) per axis.
struct DipoleKernel {
  Dims dims{};
  VoxelSize voxel{};
  std::vector<double> values;
};

DipoleKernel dipole_kernel(Dims dims, VoxelSize voxel);

// D (x) chi, real part. Grid of `chi` must match the kernel.
Volume3D apply_dipole(const Volume3D& chi, const DipoleKernel& kernel);

Volume3D field_forward(const SourcePair& src, const DipoleKernel& kernel);

/// Non-periodic variant: embeds `chi` in a zero-filled grid enlarged by
/// `pad` voxels per axis, convolves there, and crops back. Removes the
/// wrap-around contribution of periodic images.
Volume3D apply_dipole_padded(const Volume3D& chi, int pad);
Volume3D field_forward_padded(const SourcePair& src, int pad);
Volume3D r2p_forward(const SourcePair& src, const DecayKernelMap& a_map);
AcquisitionSet forward_model(const SourcePair& src, const DecayKernelMap& a_map, const MaskVolume& mask);

/// Closed-form field of a uniformly magnetized sphere with B0 along z.
/// `center` is in voxel index coordinates, `radius_mm` in mm. Outside:
/// (delta_chi/3) (R/r)^3 (3 cos^2 theta - 1); inside: 0.
Volume3D analytic_sphere_field(Dims dims, VoxelSize voxel, const std::array<double, 3>& center, double radius_mm,
                               double delta_chi);

// Sphere source with partial-volume weights estimated by `supersample`^3
// sub-samples per voxel (1 = binary voxelization).
Volume3D sphere_source(Dims dims, VoxelSize voxel, const std::array<double, 3>& center, double radius_mm,
                       double delta_chi, int supersample = 1);

}  // namespace chisep

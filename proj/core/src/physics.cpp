#include "chisep/physics.hpp"

#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/fft.hpp"

namespace chisep {

SourcePair SourcePair::checked(Volume3D pos, Volume3D neg) {
  require_same_grid(pos, neg, "SourcePair");
  SourcePair s{std::move(pos), std::move(neg)};
  if (!s.satisfies_sign_convention()) {
    throw InvalidArgument("SourcePair requires chi_pos >= 0 and chi_neg <= 0");
  }
  return s;
}

SourcePair SourcePair::zeros(Dims dims, VoxelSize voxel) {
  return SourcePair{Volume3D(dims, voxel, 0.0, "ppm"), Volume3D(dims, voxel, 0.0, "ppm")};
}

bool SourcePair::satisfies_sign_convention() const noexcept {
  if (chi_pos.dims() != chi_neg.dims()) return false;
  for (std::size_t i = 0; i < chi_pos.size(); ++i) {
    if (chi_pos[i] < 0.0 || chi_neg[i] > 0.0) return false;
  }
  return true;
}

Volume3D SourcePair::net() const {
  require_same_grid(chi_pos, chi_neg, "SourcePair::net");
  Volume3D out(chi_pos.dims(), chi_pos.voxel_size(), 0.0, "ppm");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = chi_pos[i] + chi_neg[i];
  return out;
}

Volume3D SourcePair::absolute() const {
  require_same_grid(chi_pos, chi_neg, "SourcePair::absolute");
  Volume3D out(chi_pos.dims(), chi_pos.voxel_size(), 0.0, "ppm");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = chi_pos[i] - chi_neg[i];
  return out;
}

DecayKernelMap::DecayKernelMap(Volume3D a_map) : a_(std::move(a_map)) {
  for (std::size_t i = 0; i < a_.size(); ++i) {
    if (!(a_[i] >= 0.0)) throw InvalidArgument("decay-kernel map must be non-negative");
  }
  if (a_.units().empty()) a_.set_units("1/(s*ppm)");
}

void AcquisitionSet::validate() const {
  require_same_grid(qsm, local_field, "AcquisitionSet local_field");
  require_same_grid(qsm, r2_prime, "AcquisitionSet r2_prime");
  require_same_grid(qsm, a_map.volume(), "AcquisitionSet a_map");
  require_same_grid(qsm, mask, "AcquisitionSet mask");
  for (std::size_t i = 0; i < r2_prime.size(); ++i) {
    if (mask[i] && r2_prime[i] < 0.0) throw InvalidArgument("AcquisitionSet: negative R2' inside mask");
  }
}

DipoleKernel dipole_kernel(Dims dims, VoxelSize voxel) {
  validate_grid(dims, voxel);
  if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2) {
    throw InvalidArgument("dipole_kernel: dims must be >= 2 along every axis, got " + to_string(dims));
  }
  auto freq = [](int m, int n, double d) {
    const int f = m < (n + 1) / 2 ? m : m - n;
    return static_cast<double>(f) / (static_cast<double>(n) * d);
  };
  DipoleKernel k{dims, voxel, std::vector<double>(dims.count())};
  for (int z = 0; z < dims.nz; ++z) {
    const double kz = freq(z, dims.nz, voxel.dz);
    for (int y = 0; y < dims.ny; ++y) {
      const double ky = freq(y, dims.ny, voxel.dy);
      for (int x = 0; x < dims.nx; ++x) {
        const double kx = freq(x, dims.nx, voxel.dx);
        const double k2 = kx * kx + ky * ky + kz * kz;
        k.values[linear_index(dims, x, y, z)] = k2 > 0.0 ? 1.0 / 3.0 - kz * kz / k2 : 0.0;
      }
    }
  }
  return k;
}

Volume3D apply_dipole(const Volume3D& chi, const DipoleKernel& kernel) {
  if (chi.dims() != kernel.dims) {
    throw InvalidArgument("dipole kernel dims " + to_string(kernel.dims) + " do not match volume " +
                          to_string(chi.dims()));
  }
  Volume3D out = apply_spectral_kernel(chi, kernel.values);
  out.set_units("ppm");
  return out;
}

Volume3D field_forward(const SourcePair& src, const DipoleKernel& kernel) { return apply_dipole(src.net(), kernel); }

Volume3D apply_dipole_padded(const Volume3D& chi, int pad) {
  if (pad < 0) throw InvalidArgument("apply_dipole_padded: pad must be >= 0");
  if (pad == 0) return apply_dipole(chi, dipole_kernel(chi.dims(), chi.voxel_size()));
  const Dims d = chi.dims();
  const Dims big{d.nx + pad, d.ny + pad, d.nz + pad};
  Volume3D embedded(big, chi.voxel_size(), 0.0, chi.units());
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) embedded.at(i, j, k) = chi.at(i, j, k);
  const Volume3D field = apply_dipole(embedded, dipole_kernel(big, chi.voxel_size()));
  return crop(field, Index3{0, 0, 0}, d);
}

Volume3D field_forward_padded(const SourcePair& src, int pad) { return apply_dipole_padded(src.net(), pad); }

Volume3D r2p_forward(const SourcePair& src, const DecayKernelMap& a_map) {
  require_same_grid(src.chi_pos, a_map.volume(), "r2p_forward");
  Volume3D abs = src.absolute();
  Volume3D out(abs.dims(), abs.voxel_size(), 0.0, "1/s");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a_map[i] * abs[i];
  return out;
}

AcquisitionSet forward_model(const SourcePair& src, const DecayKernelMap& a_map, const MaskVolume& mask) {
  require_same_grid(src.chi_pos, src.chi_neg, "forward_model");
  require_same_grid(src.chi_pos, mask, "forward_model");
  const DipoleKernel d = dipole_kernel(src.dims(), src.voxel_size());
  return AcquisitionSet{field_forward(src, d), r2p_forward(src, a_map), src.net(), a_map, mask};
}

Volume3D analytic_sphere_field(Dims dims, VoxelSize voxel, const std::array<double, 3>& center, double radius_mm,
                               double delta_chi) {
  validate_grid(dims, voxel);
  if (!(radius_mm > 0.0)) throw InvalidArgument("analytic_sphere_field: radius must be > 0");
  Volume3D out(dims, voxel, 0.0, "ppm");
  const double r3 = radius_mm * radius_mm * radius_mm;
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        const double x = (i - center[0]) * voxel.dx;
        const double y = (j - center[1]) * voxel.dy;
        const double z = (k - center[2]) * voxel.dz;
        const double rr = x * x + y * y + z * z;
        const double r = std::sqrt(rr);
        if (r <= radius_mm) continue;
        const double cos2 = z * z / rr;
        out.at(i, j, k) = delta_chi / 3.0 * r3 / (rr * r) * (3.0 * cos2 - 1.0);
      }
  return out;
}

Volume3D sphere_source(Dims dims, VoxelSize voxel, const std::array<double, 3>& center, double radius_mm,
                       double delta_chi, int supersample) {
  validate_grid(dims, voxel);
  if (!(radius_mm > 0.0)) throw InvalidArgument("sphere_source: radius must be > 0");
  if (supersample < 1) throw InvalidArgument("sphere_source: supersample must be >= 1");
  Volume3D out(dims, voxel, 0.0, "ppm");
  const double r2 = radius_mm * radius_mm;
  const int s = supersample;
  const double w = 1.0 / (s * s * s);
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        int inside = 0;
        for (int c = 0; c < s; ++c)
          for (int b = 0; b < s; ++b)
            for (int a = 0; a < s; ++a) {
              const double x = (i - center[0] + (a + 0.5) / s - 0.5) * voxel.dx;
              const double y = (j - center[1] + (b + 0.5) / s - 0.5) * voxel.dy;
              const double z = (k - center[2] + (c + 0.5) / s - 0.5) * voxel.dz;
              if (x * x + y * y + z * z <= r2) ++inside;
            }
        out.at(i, j, k) = delta_chi * inside * w;
      }
  return out;
}

}  // namespace chisep

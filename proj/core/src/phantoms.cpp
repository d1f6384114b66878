#include "chisep/phantoms.hpp"

#include <algorithm>
#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/filters.hpp"
#include "chisep/random.hpp"

namespace chisep {
namespace {

struct Ellipsoid {
  std::array<double, 3> c;
  std::array<double, 3> r;
  bool contains(double x, double y, double z) const noexcept {
    const double a = (x - c[0]) / r[0], b = (y - c[1]) / r[1], d = (z - c[2]) / r[2];
    return a * a + b * b + d * d <= 1.0;
  }
};

Volume3D smooth_random_field(Rng& rng, Dims dims, VoxelSize voxel, double sigma) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Volume3D noise(dims, voxel, 0.0);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = n01(rng);
  Volume3D s = gaussian_smooth(noise, sigma);
  double peak = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) peak = std::max(peak, std::abs(s[i]));
  if (peak > 0.0)
    for (std::size_t i = 0; i < s.size(); ++i) s[i] /= peak;
  return s;
}

}  // namespace

Phantom generate_brain_phantom(std::uint64_t seed, Dims dims, VoxelSize voxel, const PhantomConfig& cfg) {
  validate_grid(dims, voxel);
  if (dims.nx < cfg.min_dim || dims.ny < cfg.min_dim || dims.nz < cfg.min_dim) {
    throw InvalidArgument("generate_brain_phantom: dims " + to_string(dims) + " too small (need >= " +
                          std::to_string(cfg.min_dim) + " per axis)");
  }
  if (cfg.min_structures < 1 || cfg.max_structures < cfg.min_structures) {
    throw InvalidArgument("generate_brain_phantom: invalid structure count range");
  }
  Rng rng(seed);

  Ellipsoid brain;
  for (int a = 0; a < 3; ++a) {
    brain.c[a] = (dims[a] - 1) / 2.0 + uniform(rng, -0.03, 0.03) * dims[a];
    brain.r[a] = uniform(rng, 0.38, 0.46) * dims[a];
  }

  MaskVolume mask(dims, voxel, false);
  Volume3D pos(dims, voxel, 0.0, "ppm"), neg(dims, voxel, 0.0, "ppm");
  const double pos_bg = uniform(rng, cfg.pos_background[0], cfg.pos_background[1]);
  const double neg_bg = uniform(rng, cfg.neg_background[0], cfg.neg_background[1]);
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        if (!brain.contains(i, j, k)) continue;
        const std::size_t idx = linear_index(dims, i, j, k);
        mask.set(idx, true);
        pos[idx] = pos_bg;
        neg[idx] = neg_bg;
      }

  const int n_struct = uniform_int(rng, cfg.min_structures, cfg.max_structures);
  for (int s = 0; s < n_struct; ++s) {
    // Alternate so both kinds are always present; the rest is random.
    const bool paramagnetic = s < 2 ? (s == 0) : (uniform(rng, 0.0, 1.0) < 0.5);
    Ellipsoid e;
    for (int a = 0; a < 3; ++a) {
      e.r[a] = uniform(rng, 0.06, 0.16) * dims[a];
      e.c[a] = brain.c[a] + uniform(rng, -0.55, 0.55) * brain.r[a];
    }
    const double value = paramagnetic ? uniform(rng, cfg.pos_range[0], cfg.pos_range[1])
                                      : uniform(rng, cfg.neg_range[0], cfg.neg_range[1]);
    Volume3D& target = paramagnetic ? pos : neg;
    for (int k = 0; k < dims.nz; ++k)
      for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i) {
          const std::size_t idx = linear_index(dims, i, j, k);
          if (mask[idx] && e.contains(i, j, k)) target[idx] = value;
        }
  }

  if (cfg.smooth_sigma > 0.0) {
    pos = gaussian_smooth(pos, cfg.smooth_sigma);
    neg = gaussian_smooth(neg, cfg.smooth_sigma);
  }
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (!mask[i]) {
      pos[i] = 0.0;
      neg[i] = 0.0;
    }
    pos[i] = std::max(pos[i], 0.0);
    neg[i] = std::min(neg[i], 0.0);
  }

  const double field_sigma = std::max(2.0, std::min({dims.nx, dims.ny, dims.nz}) / 8.0);
  const Volume3D mod = smooth_random_field(rng, dims, voxel, field_sigma);
  Volume3D a(dims, voxel, 0.0, "1/(s*ppm)");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = cfg.a0 * (1.0 + cfg.a_modulation * mod[i]);

  return Phantom{SourcePair::checked(std::move(pos), std::move(neg)), DecayKernelMap(std::move(a)), std::move(mask)};
}

bool lesion_contains(const Lesion& l, int i, int j, int k) noexcept {
  const int di = i - l.center[0], dj = j - l.center[1], dk = k - l.center[2];
  if (l.shape == LesionShape::Cuboid) {
    return std::abs(di) <= l.radii[0] && std::abs(dj) <= l.radii[1] && std::abs(dk) <= l.radii[2];
  }
  const double a = static_cast<double>(di) / l.radii[0];
  const double b = static_cast<double>(dj) / l.radii[1];
  const double c = static_cast<double>(dk) / l.radii[2];
  return a * a + b * b + c * c <= 1.0;
}

namespace {

void stamp(const Lesion& l, const Dims& d, std::vector<double>& pos_inc, std::vector<double>& neg_inc,
           std::vector<std::uint8_t>& pos_hit, std::vector<std::uint8_t>& neg_hit) {
  for (int k = std::max(0, l.center[2] - l.radii[2]); k <= std::min(d.nz - 1, l.center[2] + l.radii[2]); ++k)
    for (int j = std::max(0, l.center[1] - l.radii[1]); j <= std::min(d.ny - 1, l.center[1] + l.radii[1]); ++j)
      for (int i = std::max(0, l.center[0] - l.radii[0]); i <= std::min(d.nx - 1, l.center[0] + l.radii[0]); ++i) {
        if (!lesion_contains(l, i, j, k)) continue;
        const std::size_t idx = linear_index(d, i, j, k);
        if (l.kind == LesionKind::Hemorrhage) {
          pos_inc[idx] = l.value;
          pos_hit[idx] = 1;
        } else {
          neg_inc[idx] = l.value;
          neg_hit[idx] = 1;
        }
      }
}

SourcePair apply_increments(const SourcePair& src, const std::vector<Lesion>& lesions) {
  const Dims d = src.dims();
  std::vector<double> pos_inc(d.count(), 0.0), neg_inc(d.count(), 0.0);
  std::vector<std::uint8_t> pos_hit(d.count(), 0), neg_hit(d.count(), 0);
  for (const auto& l : lesions) stamp(l, d, pos_inc, neg_inc, pos_hit, neg_hit);
  Volume3D pos = src.chi_pos, neg = src.chi_neg;
  for (std::size_t i = 0; i < d.count(); ++i) {
    if (pos_hit[i]) pos[i] += pos_inc[i];
    if (neg_hit[i]) neg[i] += neg_inc[i];
  }
  return SourcePair{std::move(pos), std::move(neg)};
}

}  // namespace

LesionResult insert_lesions(const SourcePair& src, const MaskVolume& placement, std::uint64_t seed,
                            const LesionConfig& cfg) {
  require_same_grid(src.chi_pos, src.chi_neg, "insert_lesions");
  require_same_grid(src.chi_pos, placement, "insert_lesions");
  if (cfg.min_count < 0 || cfg.max_count < cfg.min_count || cfg.min_radius < 1 || cfg.max_radius < cfg.min_radius) {
    throw InvalidArgument("insert_lesions: invalid lesion config");
  }
  const Dims d = src.dims();
  std::vector<Index3> candidates;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i)
        if (placement.at(i, j, k)) candidates.push_back({i, j, k});

  // Radii shrink on grids too small for the configured range so that every
  // bounding box can fit.
  const int r_hi = std::min(cfg.max_radius, (std::min({d.nx, d.ny, d.nz}) - 1) / 2);
  const int r_lo = std::min(cfg.min_radius, r_hi);
  if (r_hi < 1) throw PlacementError("insert_lesions: grid " + to_string(d) + " too small for any lesion");

  Rng rng(seed);
  const int count = uniform_int(rng, cfg.min_count, cfg.max_count);
  std::vector<Lesion> lesions;
  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !candidates.empty(); ++attempt) {
      Lesion l;
      l.kind = uniform(rng, 0.0, 1.0) < cfg.hemorrhage_probability ? LesionKind::Hemorrhage : LesionKind::Calcification;
      l.shape = static_cast<LesionShape>(uniform_int(rng, 0, 2));
      if (l.shape == LesionShape::Sphere) {
        const int r = uniform_int(rng, r_lo, r_hi);
        l.radii = {r, r, r};
      } else {
        for (int a = 0; a < 3; ++a) l.radii[a] = uniform_int(rng, r_lo, r_hi);
      }
      l.center = candidates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))];
      const auto& range = l.kind == LesionKind::Hemorrhage ? cfg.hemorrhage_range : cfg.calcification_range;
      l.value = uniform(rng, range[0], range[1]);
      bool fits = true;
      for (int a = 0; a < 3; ++a) {
        if (l.center[a] - l.radii[a] < 0 || l.center[a] + l.radii[a] > d[a] - 1) fits = false;
      }
      if (!fits) continue;
      lesions.push_back(l);
      placed = true;
      break;
    }
    if (!placed) {
      throw PlacementError("insert_lesions: no placement inside the mask after " + std::to_string(cfg.max_retries) +
                           " attempts (grid " + to_string(d) + ")");
    }
  }
  return LesionResult{apply_increments(src, lesions), std::move(lesions)};
}

SourcePair add_lesion(const SourcePair& src, const Lesion& lesion) { return apply_increments(src, {lesion}); }

CylinderPhantom generate_cylinder_phantom(const CylinderPhantomConfig& cfg) {
  validate_grid(cfg.dims, cfg.voxel);
  if (!(cfg.radius_mm > 0.0) || !(cfg.roi_radius_mm > 0.0) || cfg.roi_radius_mm > cfg.radius_mm) {
    throw InvalidArgument("generate_cylinder_phantom: need 0 < roi radius <= cylinder radius");
  }
  if (cfg.spacing_mm <= 2.0 * cfg.radius_mm) {
    throw InvalidArgument("generate_cylinder_phantom: overlapping cylinders (spacing <= 2 * radius)");
  }
  const Dims d = cfg.dims;
  const VoxelSize v = cfg.voxel;
  const double cx = (d.nx - 1) / 2.0 * v.dx, cy = (d.ny - 1) / 2.0 * v.dy;
  // Two-voxel margin keeps every cylinder away from the grid border.
  const double reach = cfg.spacing_mm + cfg.radius_mm;
  if (cx - reach < 2.0 * v.dx || cy - reach < 2.0 * v.dy) {
    throw InvalidArgument("generate_cylinder_phantom: grid " + to_string(d) + " too small for 3x3 cylinders");
  }
  const int z_len = static_cast<int>(std::round(cfg.length_fraction * d.nz));
  const int z0 = (d.nz - z_len) / 2, z1 = z0 + z_len;  // [z0, z1)
  if (z_len < cfg.roi_slices || cfg.roi_slices < 1) {
    throw InvalidArgument("generate_cylinder_phantom: cylinders shorter than the ROI slab");
  }
  const int roi_z0 = d.nz / 2 - cfg.roi_slices / 2;

  CylinderPhantom ph;
  ph.config = cfg;
  Volume3D pos(d, v, 0.0, "ppm"), neg(d, v, 0.0, "ppm");
  MaskVolume mask(d, v, false);
  for (int k = 1; k < d.nz - 1; ++k)
    for (int j = 1; j < d.ny - 1; ++j)
      for (int i = 1; i < d.nx - 1; ++i) mask.set(linear_index(d, i, j, k), true);

  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) {
      // Centres snapped to voxels so every cylinder footprint is an exact translate.
      const double ox = std::round((cx + (col - 1) * cfg.spacing_mm) / v.dx) * v.dx;
      const double oy = std::round((cy + (row - 1) * cfg.spacing_mm) / v.dy) * v.dy;
      const double p = cfg.para_ppm_per_unit * cfg.para_concentration[static_cast<std::size_t>(col)];
      const double n = cfg.dia_ppm_per_unit * cfg.dia_concentration[static_cast<std::size_t>(col)];
      MaskVolume roi(d, v, false);
      for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
          for (int i = 0; i < d.nx; ++i) {
            const double x = i * v.dx - ox, y = j * v.dy - oy;
            const double r2 = x * x + y * y;
            const std::size_t idx = linear_index(d, i, j, k);
            if (k >= z0 && k < z1 && r2 <= cfg.radius_mm * cfg.radius_mm) {
              if (row == 0 || row == 2) neg[idx] += n;
              if (row == 1 || row == 2) pos[idx] += p;
            }
            if (k >= roi_z0 && k < roi_z0 + cfg.roi_slices && r2 <= cfg.roi_radius_mm * cfg.roi_radius_mm) {
              roi.set(idx, true);
            }
          }
      ph.rois[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = std::move(roi);
    }
  ph.sources = SourcePair::checked(std::move(pos), std::move(neg));
  ph.a_map = DecayKernelMap(Volume3D(d, v, cfg.a0, "1/(s*ppm)"));
  ph.mask = std::move(mask);
  return ph;
}

}  // namespace chisep

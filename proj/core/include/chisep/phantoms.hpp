#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "chisep/physics.hpp"

namespace chisep {

/// Procedural head-like phantom. Defaults are artifact choices, not measured
/// tissue values.
struct PhantomConfig {
  double a0 = 100.0;               // nominal decay kernel, 1/(s*ppm)
  double a_modulation = 0.3;       // A in [(1-m) a0, (1+m) a0]
  int min_structures = 6;
  int max_structures = 10;
  std::array<double, 2> pos_range{0.05, 0.20};    // deep-grey-like chi_pos, ppm
  std::array<double, 2> neg_range{-0.08, -0.01};  // white-matter-like chi_neg, ppm
  // Low-level co-located sources everywhere inside the brain.
  std::array<double, 2> pos_background{0.005, 0.02};
  std::array<double, 2> neg_background{-0.02, -0.005};
  double smooth_sigma = 1.0;  // voxels
  int min_dim = 16;
};

struct Phantom {
  SourcePair sources;
  DecayKernelMap a_map;
  MaskVolume mask;
};

Phantom generate_brain_phantom(std::uint64_t seed, Dims dims, VoxelSize voxel, const PhantomConfig& cfg = {});

enum class LesionKind { Hemorrhage, Calcification };
enum class LesionShape { Sphere, Ellipsoid, Cuboid };

struct LesionConfig {
  int min_count = 1;
  int max_count = 4;
  int min_radius = 2;  // voxels
  int max_radius = 8;
  std::array<double, 2> hemorrhage_range{0.4, 1.2};
  std::array<double, 2> calcification_range{-0.3, -0.1};
  double hemorrhage_probability = 0.5;
  int max_retries = 200;
};

struct Lesion {
  LesionKind kind;
  LesionShape shape;
  Index3 center;
  Index3 radii;
  double value;  // ppm added on top of the background
};

struct LesionResult {
  SourcePair sources;
  std::vector<Lesion> lesions;
};

// True if voxel (i,j,k) lies in the lesion footprint.
bool lesion_contains(const Lesion& l, int i, int j, int k) noexcept;

/// Adds 1..4 geometric lesions whose centres lie in `placement` and whose
/// bounding boxes fit the grid. Hemorrhages go to chi_pos, calcifications to
/// chi_neg; overlapping lesions of the same kind keep the later value so
/// every lesion voxel is background + one sampled constant.
LesionResult insert_lesions(const SourcePair& src, const MaskVolume& placement, std::uint64_t seed,
                            const LesionConfig& cfg = {});

// Deterministic single-lesion insertion used by the pathology test case.
SourcePair add_lesion(const SourcePair& src, const Lesion& lesion);

/// 3x3 cylinder phantom: row 0 diamagnetic, row 1 paramagnetic, row 2 the
/// voxel-wise sum of rows 0 and 1. Cylinders run along z.
struct CylinderPhantomConfig {
  Dims dims{64, 64, 32};
  VoxelSize voxel{};
  double radius_mm = 5.0;
  double spacing_mm = 16.0;  // centre-to-centre
  double length_fraction = 0.6;
  std::array<double, 3> dia_concentration{58.0, 116.0, 174.0};  // mg/ml
  std::array<double, 3> para_concentration{2.0, 4.0, 6.0};      // ug/ml
  double dia_ppm_per_unit = -0.001;  // chi_neg per mg/ml
  double para_ppm_per_unit = 0.02;   // chi_pos per ug/ml
  double a0 = 100.0;
  int roi_slices = 9;
  double roi_radius_mm = 3.5;
};

struct CylinderPhantom {
  SourcePair sources;
  DecayKernelMap a_map;
  MaskVolume mask;
  // rois[row][col]
  std::array<std::array<MaskVolume, 3>, 3> rois;
  CylinderPhantomConfig config;
};

CylinderPhantom generate_cylinder_phantom(const CylinderPhantomConfig& cfg = {});

}  // namespace chisep

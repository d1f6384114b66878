#pragma once

#include <array>
#include <span>
#include <vector>

#include "chisep/volume.hpp"

namespace chisep {

/// 100 * ||est - ref|| / ||ref|| over mask voxels. UndefinedMetric when ref
/// is zero on the mask.
double nrmse(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask);

struct HfenParams {
  double sigma = 1.5;  // voxels
  int size = 15;
};

/// NRMSE of Laplacian-of-Gaussian filtered volumes, within mask.
double hfen(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const HfenParams& params = {});

struct XsimParams {
  double dynamic_range = 1.0;  // ppm
  double k1 = 0.01;
  double k2 = 0.001;
  double sigma = 1.5;  // Gaussian window, voxels
  int radius = 5;
};

/// Structural similarity with susceptibility-tuned constants, averaged over
/// mask voxels. Symmetric in its arguments.
double xsim(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const XsimParams& params = {});

struct RoiStats {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

RoiStats roi_stats(const Volume3D& vol, const MaskVolume& roi);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Zero-variance y gives
/// R^2 = 1.
RegressionResult linear_regression(std::span<const double> xs, std::span<const double> ys);

struct ProfileSample {
  double distance_mm = 0.0;
  double value = 0.0;
};

/// Trilinear samples at `n` equidistant points from p0 to p1 (voxel index
/// coordinates, both inside the grid).
std::vector<ProfileSample> line_profile(const Volume3D& vol, const std::array<double, 3>& p0,
                                        const std::array<double, 3>& p1, int n);

double trilinear(const Volume3D& vol, const std::array<double, 3>& p);

}  // namespace chisep

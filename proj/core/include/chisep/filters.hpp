#pragma once

#include <vector>

#include "chisep/volume.hpp"

namespace chisep {

// Normalized 1D Gaussian taps of length 2*radius+1.
std::vector<double> gaussian_taps(double sigma, int radius);

// Separable Gaussian blur in voxel units with edge replication.
// radius < 0 picks ceil(3 sigma).
Volume3D gaussian_smooth(const Volume3D& v, double sigma, int radius = -1);

/// Zero-sum Laplacian-of-Gaussian kernel with `size`^3 support (size odd),
/// stored x-fastest. Zero-sum makes it annihilate constants exactly.
std::vector<double> log_kernel(double sigma, int size);

// Circular convolution of `v` with a centred `size`^3 kernel.
Volume3D convolve_periodic(const Volume3D& v, const std::vector<double>& kernel, int size);

}  // namespace chisep

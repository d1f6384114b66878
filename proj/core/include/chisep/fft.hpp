#pragma once

#include <complex>
#include <span>
#include <vector>

#include "chisep/volume.hpp"

namespace chisep {

using Complex = std::complex<double>;

// Complex grid in x-fastest order; used for both spatial data and spectra.
struct ComplexVolume {
  Dims dims{};
  std::vector<Complex> data;

  ComplexVolume() = default;
  explicit ComplexVolume(Dims d) : dims(d), data(d.count()) {}
  static ComplexVolume from_real(const Volume3D& v);
};

// Unnormalized forward DFT:  X[k] = sum_r x[r] exp(-2 pi i k.r / n)
ComplexVolume fft3(const ComplexVolume& x);
// Inverse DFT including the 1 / (nx ny nz) factor, so ifft3(fft3(x)) == x.
ComplexVolume ifft3(const ComplexVolume& spectrum);

// Raw-buffer variants. `out` may not alias `in`.
void fft3(Dims dims, std::span<const Complex> in, std::span<Complex> out);
void ifft3(Dims dims, std::span<const Complex> in, std::span<Complex> out);

/// Real part of ifft3(kernel * fft3(x)) for a real spectral kernel sampled
/// on the same grid as `x`. Throws InvalidArgument on size mismatch.
std::vector<double> apply_spectral_kernel(Dims dims, std::span<const double> x,
                                          std::span<const double> kernel);
Volume3D apply_spectral_kernel(const Volume3D& x, std::span<const double> kernel);

}  // namespace chisep

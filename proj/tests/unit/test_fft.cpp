#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "chisep/errors.hpp"
#include "chisep/fft.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

ComplexVolume random_complex(Dims d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ComplexVolume x(d);
  for (auto& v : x.data) v = {g(rng), g(rng)};
  return x;
}

// Direct O(N^2) summation of the forward DFT.
ComplexVolume direct_dft(const ComplexVolume& x) {
  const Dims d = x.dims;
  ComplexVolume out(d);
  for (int kz = 0; kz < d.nz; ++kz)
    for (int ky = 0; ky < d.ny; ++ky)
      for (int kx = 0; kx < d.nx; ++kx) {
        Complex acc{0.0, 0.0};
        for (int z = 0; z < d.nz; ++z)
          for (int y = 0; y < d.ny; ++y)
            for (int xx = 0; xx < d.nx; ++xx) {
              const double ph = -2.0 * std::numbers::pi *
                                (double(kx) * xx / d.nx + double(ky) * y / d.ny + double(kz) * z / d.nz);
              acc += x.data[linear_index(d, xx, y, z)] * Complex(std::cos(ph), std::sin(ph));
            }
        out.data[linear_index(d, kx, ky, kz)] = acc;
      }
  return out;
}

double max_abs_diff(const ComplexVolume& a, const ComplexVolume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

TEST(Fft, ConstantGivesDcOnly) {
  const Volume3D c = create_volume({4, 6, 5}, {}, 2.5);
  const ComplexVolume s = fft3(ComplexVolume::from_real(c));
  EXPECT_NEAR(s.data[0].real(), 2.5 * 120, 1e-9);
  for (std::size_t i = 1; i < s.data.size(); ++i) EXPECT_LT(std::abs(s.data[i]), 1e-9);
}

TEST(Fft, MatchesDirectSummation) {
  const ComplexVolume x = random_complex({5, 4, 3}, 11);
  EXPECT_LT(max_abs_diff(fft3(x), direct_dft(x)), 1e-10);
}

TEST(Fft, RoundTripIdentity) {
  const ComplexVolume x = random_complex({8, 8, 8}, 3);
  EXPECT_LT(max_abs_diff(ifft3(fft3(x)), x), 1e-10);
}

TEST(Fft, Parseval) {
  const ComplexVolume x = random_complex({8, 8, 8}, 5);
  const ComplexVolume s = direct_dft(x);
  double ex = 0.0, es = 0.0;
  for (const auto& v : x.data) ex += std::norm(v);
  for (const auto& v : s.data) es += std::norm(v);
  EXPECT_LT(std::abs(ex - es / 512.0) / ex, 1e-10);
}

TEST(Fft, SpectralKernelOfOnesIsIdentity) {
  const Volume3D x = testing::random_volume({6, 5, 4}, 9);
  const std::vector<double> ones(x.size(), 1.0);
  const Volume3D y = apply_spectral_kernel(x, ones);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Fft, SpectralKernelSizeMismatch) {
  const Volume3D x = testing::random_volume({4, 4, 4}, 9);
  EXPECT_THROW(apply_spectral_kernel(x, std::vector<double>(10, 1.0)), InvalidArgument);
}

}  // namespace
}  // namespace chisep

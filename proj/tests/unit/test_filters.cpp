#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "chisep/filters.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

TEST(Filters, GaussianTapsNormalizedAndSymmetric) {
  const auto t = gaussian_taps(1.5, 5);
  ASSERT_EQ(t.size(), 11u);
  EXPECT_NEAR(std::accumulate(t.begin(), t.end(), 0.0), 1.0, 1e-14);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(t[i], t[10 - i]);
}

TEST(Filters, SmoothingPreservesConstants) {
  const Volume3D c = create_volume({7, 6, 5}, {}, 3.0);
  const Volume3D s = gaussian_smooth(c, 1.5, 5);
  for (double v : s.data()) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(Filters, LogKernelZeroSum) {
  const auto k = log_kernel(1.5, 15);
  ASSERT_EQ(k.size(), 15u * 15u * 15u);
  EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 0.0, 1e-12);
}

TEST(Filters, PeriodicConvolutionMatchesDirectSum) {
  const Volume3D v = testing::random_volume({6, 5, 4}, 2);
  const int size = 3;
  std::vector<double> k(27);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = 0.1 * double(i) - 1.0;
  const Volume3D out = convolve_periodic(v, k, size);
  const Dims d = v.dims();
  auto wrap = [](int a, int n) { return ((a % n) + n) % n; };
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        double acc = 0.0;
        for (int c = -1; c <= 1; ++c)
          for (int b = -1; b <= 1; ++b)
            for (int a = -1; a <= 1; ++a)
              acc += k[linear_index({3, 3, 3}, a + 1, b + 1, c + 1)] *
                     v.at(wrap(x - a, d.nx), wrap(y - b, d.ny), wrap(z - c, d.nz));
        EXPECT_NEAR(out.at(x, y, z), acc, 1e-12);
      }
}

}  // namespace
}  // namespace chisep

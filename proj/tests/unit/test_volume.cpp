#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "chisep/errors.hpp"
#include "chisep/volume.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

TEST(Volume, FillConstant) {
  const Volume3D v = create_volume({2, 2, 2}, {}, 0.0);
  EXPECT_EQ(v.size(), 8u);
  for (double x : v.data()) EXPECT_EQ(x, 0.0);
}

TEST(Volume, SumOfOnes) { EXPECT_DOUBLE_EQ(create_volume({4, 4, 4}, {}, 1.0).sum(), 64.0); }

TEST(Volume, RejectsZeroDim) { EXPECT_THROW(create_volume({0, 4, 4}, {}, 0.0), InvalidArgument); }

TEST(Volume, RejectsBadVoxelSize) {
  EXPECT_THROW(create_volume({2, 2, 2}, {1.0, 0.0, 1.0}, 0.0), InvalidArgument);
  EXPECT_THROW(create_volume({2, 2, 2}, {1.0, std::numeric_limits<double>::infinity(), 1.0}, 0.0), InvalidArgument);
}

TEST(Volume, RejectsNonFiniteData) {
  EXPECT_THROW(create_volume({2, 2, 2}, {}, std::nan("")), InvalidArgument);
  std::vector<double> d(8, 0.0);
  d[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Volume3D({2, 2, 2}, {}, d), InvalidArgument);
}

TEST(Volume, RejectsLengthMismatch) { EXPECT_THROW(Volume3D({2, 2, 2}, {}, std::vector<double>(7)), InvalidArgument); }

TEST(Volume, LinearIndexIsXFastest) {
  const Dims d{3, 4, 5};
  EXPECT_EQ(linear_index(d, 1, 0, 0), 1u);
  EXPECT_EQ(linear_index(d, 0, 1, 0), 3u);
  EXPECT_EQ(linear_index(d, 0, 0, 1), 12u);
  EXPECT_EQ(linear_index(d, 2, 3, 4), d.count() - 1);
}

TEST(Volume, CropCopiesBlock) {
  const Volume3D v = testing::random_volume({6, 5, 4}, 1);
  const Volume3D c = crop(v, {1, 2, 1}, {3, 2, 2});
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 3; ++i) EXPECT_EQ(c.at(i, j, k), v.at(i + 1, j + 2, k + 1));
  EXPECT_THROW(crop(v, {4, 0, 0}, {3, 1, 1}), InvalidArgument);
}

TEST(Volume, MaskRoundTripAndEmpty) {
  MaskVolume m({3, 3, 3}, {}, false);
  EXPECT_EQ(m.count(), 0u);
  EXPECT_THROW(m.require_nonempty("test"), InvalidArgument);
  m.set(5, true);
  const MaskVolume back = MaskVolume::from_volume(m.to_volume());
  EXPECT_EQ(back.count(), 1u);
  EXPECT_TRUE(back[5]);
}

TEST(Volume, SameGridChecks) {
  const Volume3D a({2, 2, 2}, {}), b({2, 2, 2}, {1.0, 1.0, 2.0});
  EXPECT_THROW(require_same_grid(a, b, "t"), InvalidArgument);
  EXPECT_NO_THROW(require_same_grid(a, a, "t"));
}

}  // namespace
}  // namespace chisep

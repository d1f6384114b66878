#include <gtest/gtest.h>

#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/metrics.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

MaskVolume full(Dims d) { return MaskVolume(d, {}, true); }

Volume3D scaled(const Volume3D& v, double a, double b = 0.0) {
  Volume3D out = v;
  for (auto& x : out.data()) x = a * x + b;
  return out;
}

TEST(Nrmse, Identities) {
  const Dims d{8, 8, 8};
  const Volume3D ref = testing::random_volume(d, 1);
  EXPECT_EQ(nrmse(ref, ref, full(d)), 0.0);
  EXPECT_NEAR(nrmse(create_volume(d, {}, 0.0), ref, full(d)), 100.0, 1e-12);
  EXPECT_NEAR(nrmse(scaled(ref, 1.1), ref, full(d)), 10.0, 1e-10);
  EXPECT_THROW(nrmse(ref, create_volume(d, {}, 0.0), full(d)), UndefinedMetric);
}

TEST(Nrmse, MaskScoped) {
  const Dims d{4, 4, 4};
  Volume3D ref = create_volume(d, {}, 1.0), est = ref;
  est[5] = 100.0;
  MaskVolume m = full(d);
  m.set(5, false);
  EXPECT_EQ(nrmse(est, ref, m), 0.0);
}

TEST(Hfen, Identities) {
  const Dims d{16, 16, 16};
  const Volume3D ref = testing::random_volume(d, 2);
  EXPECT_EQ(hfen(ref, ref, full(d)), 0.0);
  EXPECT_NEAR(hfen(scaled(ref, 1.0, 3.0), ref, full(d)), 0.0, 1e-9);
  EXPECT_NEAR(hfen(scaled(ref, 2.0), ref, full(d)), 100.0, 1e-9);
}

TEST(Xsim, IdentitySymmetryAndSign) {
  const Dims d{12, 12, 12};
  const Volume3D a = testing::random_volume(d, 3, -0.2, 0.2), b = testing::random_volume(d, 4, -0.2, 0.2);
  EXPECT_DOUBLE_EQ(xsim(a, a, full(d)), 1.0);
  EXPECT_DOUBLE_EQ(xsim(a, b, full(d)), xsim(b, a, full(d)));
  EXPECT_LT(xsim(scaled(a, -1.0), a, full(d)), 1.0);
}

TEST(Roi, Stats) {
  const Dims d{2, 2, 1};
  MaskVolume m(d, {}, false);
  m.set(0, true);
  m.set(3, true);
  Volume3D v(d, {}, std::vector<double>{1.0, 7.0, 7.0, 3.0});
  const RoiStats s = roi_stats(v, m);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
  EXPECT_EQ(s.n, 2u);
  const RoiStats c = roi_stats(create_volume(d, {}, 0.5), m);
  EXPECT_DOUBLE_EQ(c.mean, 0.5);
  EXPECT_DOUBLE_EQ(c.std, 0.0);
  const RoiStats z = roi_stats(create_volume(d, {}, 0.0), m);
  EXPECT_EQ(z.mean, 0.0);
  EXPECT_EQ(z.n, 2u);
}

TEST(Regression, Conventions) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y2{2.0, 4.0, 6.0, 8.0};
  RegressionResult r = linear_regression(x, y2);
  EXPECT_NEAR(r.slope, 2.0, 1e-12);
  EXPECT_NEAR(r.intercept, 0.0, 1e-12);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  r = linear_regression(x, std::vector<double>{5.0, 5.0, 5.0, 5.0});
  EXPECT_EQ(r.slope, 0.0);
  EXPECT_EQ(r.r_squared, 1.0);
  // Symmetric residual pattern around y = x leaves the OLS slope at 1 only
  // when it is orthogonal to x; {-d,+d,+d,-d} is.
  r = linear_regression(x, std::vector<double>{1.0 - 0.3, 2.0 + 0.3, 3.0 + 0.3, 4.0 - 0.3});
  EXPECT_NEAR(r.slope, 1.0, 1e-12);
  EXPECT_LT(r.r_squared, 1.0);
  EXPECT_THROW(linear_regression(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST(Regression, CollinearExact) {
  const std::vector<double> x{0.5, 1.5, -2.0, 3.25, 7.0};
  std::vector<double> y;
  for (double v : x) y.push_back(-0.75 * v + 0.125);
  const RegressionResult r = linear_regression(x, y);
  EXPECT_NEAR(r.slope, -0.75, 1e-12);
  EXPECT_NEAR(r.intercept, 0.125, 1e-12);
}

TEST(Profile, ConstantAndNodes) {
  const Dims d{6, 5, 4};
  for (const auto& s : line_profile(create_volume(d, {}, 2.5), {0, 0, 0}, {5, 4, 3}, 7)) EXPECT_DOUBLE_EQ(s.value, 2.5);
  const Volume3D v = testing::random_volume(d, 5);
  const auto along = line_profile(v, {0, 2, 1}, {5, 2, 1}, 6);
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(along[i].value, v.at(i, 2, 1), 1e-14);
    EXPECT_NEAR(along[i].distance_mm, double(i), 1e-14);
  }
  const auto same = line_profile(v, {1, 1, 1}, {1, 1, 1}, 3);
  for (const auto& s : same) {
    EXPECT_EQ(s.distance_mm, 0.0);
    EXPECT_EQ(s.value, v.at(1, 1, 1));
  }
  EXPECT_NEAR(trilinear(v, {0.5, 0.0, 0.0}), 0.5 * (v.at(0, 0, 0) + v.at(1, 0, 0)), 1e-14);
  EXPECT_THROW(line_profile(v, {0, 0, 0}, {6, 0, 0}, 3), InvalidArgument);
}

}  // namespace
}  // namespace chisep

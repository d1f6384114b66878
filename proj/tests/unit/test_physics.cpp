#include <gtest/gtest.h>

#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/physics.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

double dot(const Volume3D& a, const Volume3D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rel_l2(const Volume3D& a, const Volume3D& b) {
  double e = 0.0, r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    e += (a[i] - b[i]) * (a[i] - b[i]);
    r += b[i] * b[i];
  }
  return std::sqrt(e / r);
}

SourcePair random_sources(Dims d, std::uint64_t seed) {
  return SourcePair::checked(testing::random_volume(d, seed, 0.0, 0.2), testing::random_volume(d, seed + 1, -0.1, 0.0));
}

TEST(Dipole, KernelValues) {
  const Dims d{8, 8, 8};
  const DipoleKernel k = dipole_kernel(d, {});
  EXPECT_EQ(k.values[0], 0.0);
  EXPECT_NEAR(k.values[linear_index(d, 0, 0, 1)], -2.0 / 3.0, 1e-15);  // k along z
  EXPECT_NEAR(k.values[linear_index(d, 3, 2, 0)], 1.0 / 3.0, 1e-15);   // kz = 0 plane
  // Along the diagonal kx = kz: 1/3 - 1/2.
  EXPECT_NEAR(k.values[linear_index(d, 1, 0, 1)], 1.0 / 3.0 - 0.5, 1e-15);
}

TEST(Dipole, AnisotropicVoxelsUseWavenumbers) {
  // kx = 1/(8*2), kz = 1/(8*1): kz^2/|k|^2 = 4/5.
  const Dims d{8, 8, 8};
  const DipoleKernel k = dipole_kernel(d, {2.0, 1.0, 1.0});
  EXPECT_NEAR(k.values[linear_index(d, 1, 0, 1)], 1.0 / 3.0 - 0.8, 1e-15);
}

TEST(Field, ZeroAndUniformSources) {
  const Dims d{8, 8, 8};
  const DipoleKernel k = dipole_kernel(d, {});
  for (double v : field_forward(SourcePair::zeros(d, {}), k).data()) EXPECT_EQ(v, 0.0);
  const SourcePair u{create_volume(d, {}, 0.3), create_volume(d, {}, -0.1)};
  for (double v : field_forward(u, k).data()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Field, LinearSelfAdjointZeroMean) {
  const Dims d{12, 10, 8};
  const DipoleKernel k = dipole_kernel(d, {});
  const Volume3D x = testing::random_volume(d, 1), y = testing::random_volume(d, 2);
  Volume3D comb(d, {});
  for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = 2.0 * x[i] - 3.0 * y[i];
  const Volume3D fx = apply_dipole(x, k), fy = apply_dipole(y, k), fc = apply_dipole(comb, k);
  Volume3D expect(d, {});
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = 2.0 * fx[i] - 3.0 * fy[i];
  EXPECT_LT(rel_l2(fc, expect), 1e-10);
  EXPECT_NEAR(dot(fx, y), dot(x, fy), 1e-10 * std::abs(dot(fx, y)));
  EXPECT_NEAR(fx.sum() / fx.size(), 0.0, 1e-13);
}

TEST(Field, NetSourceOnly) {
  const Dims d{8, 8, 8};
  const SourcePair s = random_sources(d, 3);
  const Volume3D a = field_forward(s, dipole_kernel(d, {}));
  const Volume3D b = apply_dipole(s.net(), dipole_kernel(d, {}));
  EXPECT_LT(rel_l2(a, b), 1e-14);
}

TEST(Field, SphereAgreesWithAnalyticExterior) {
  const Dims d{64, 64, 64};
  const std::array<double, 3> c{32.0, 32.0, 32.0};
  const Volume3D chi = sphere_source(d, {}, c, 8.0, 1.0);
  const Volume3D ref = analytic_sphere_field(d, {}, c, 8.0, 1.0);
  const Volume3D padded = apply_dipole_padded(chi, 64);
  double e = 0.0, r = 0.0;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const double rr = std::sqrt((i - c[0]) * (i - c[0]) + (j - c[1]) * (j - c[1]) + (k - c[2]) * (k - c[2]));
        if (rr < 10.0) continue;
        e += std::pow(padded.at(i, j, k) - ref.at(i, j, k), 2);
        r += std::pow(ref.at(i, j, k), 2);
      }
  EXPECT_LT(std::sqrt(e / r), 0.05);
}

TEST(AnalyticSphere, ClosedFormPoints) {
  const Dims d{33, 33, 33};
  const std::array<double, 3> c{16.0, 16.0, 16.0};
  const Volume3D f = analytic_sphere_field(d, {}, c, 4.0, 1.0);
  EXPECT_NEAR(f.at(16, 16, 24), 1.0 / 3.0 * (1.0 / 8.0) * 2.0, 1e-14);  // +z, r = 2R
  EXPECT_NEAR(f.at(24, 16, 16), -1.0 / 3.0 * (1.0 / 8.0), 1e-14);       // equator
  EXPECT_EQ(f.at(17, 16, 16), 0.0);
}

TEST(R2p, Arithmetic) {
  const Dims d{1, 1, 1};
  const DecayKernelMap a(create_volume(d, {}, 100.0));
  EXPECT_NEAR(r2p_forward({create_volume(d, {}, 0.01), create_volume(d, {}, -0.005)}, a)[0], 1.5, 1e-12);
  EXPECT_NEAR(r2p_forward({create_volume(d, {}, 0.0), create_volume(d, {}, -0.2)}, a)[0], 20.0, 1e-12);
  EXPECT_EQ(r2p_forward(SourcePair::zeros(d, {}), a)[0], 0.0);
}

TEST(DecayKernel, RejectsNegative) {
  EXPECT_THROW(DecayKernelMap(create_volume({2, 2, 2}, {}, -1.0)), InvalidArgument);
}

TEST(SourcePairs, CheckedRejectsSignViolation) {
  const Dims d{2, 2, 2};
  EXPECT_THROW(SourcePair::checked(create_volume(d, {}, -0.1), create_volume(d, {}, 0.0)), InvalidArgument);
  EXPECT_THROW(SourcePair::checked(create_volume(d, {}, 0.1), create_volume(d, {}, 0.1)), InvalidArgument);
  EXPECT_THROW(SourcePair::checked(create_volume(d, {}, 0.1), create_volume({2, 2, 3}, {}, 0.0)), InvalidArgument);
}

TEST(ForwardModel, ZeroSourcesZeroAcquisition) {
  const Dims d{8, 8, 8};
  const AcquisitionSet acq = forward_model(SourcePair::zeros(d, {}), DecayKernelMap(create_volume(d, {}, 100.0)),
                                           MaskVolume(d, {}, true));
  for (std::size_t i = 0; i < acq.qsm.size(); ++i) {
    EXPECT_EQ(acq.qsm[i], 0.0);
    EXPECT_EQ(acq.r2_prime[i], 0.0);
    EXPECT_EQ(acq.local_field[i], 0.0);
  }
}

TEST(ForwardModel, AlgebraicIdentity) {
  const Dims d{16, 16, 16};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SourcePair s = random_sources(d, 10 * seed);
    const DecayKernelMap a(testing::random_volume(d, 10 * seed + 5, 50.0, 150.0));
    const AcquisitionSet acq = forward_model(s, a, MaskVolume(d, {}, true));
    for (std::size_t i = 0; i < acq.qsm.size(); ++i) {
      ASSERT_EQ(acq.qsm[i], s.chi_pos[i] + s.chi_neg[i]);
      ASSERT_NEAR(acq.r2_prime[i] / a[i] + acq.qsm[i], 2.0 * s.chi_pos[i], 1e-12);
    }
  }
}

}  // namespace
}  // namespace chisep

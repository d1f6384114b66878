#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/losses.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Tensor<double> tensor_from(TensorShape s, std::uint64_t seed) {
  Tensor<double> t(s);
  t.data = randn(s.count(), seed);
  return t;
}

TEST(Cosine, Identities) {
  const auto x = randn(50, 1), y = randn(50, 2);
  std::vector<double> neg(x), orth{1.0, 0.0, 0.0}, orth2{0.0, 2.0, 0.0};
  for (auto& v : neg) v = -v;
  EXPECT_NEAR(cosine_similarity(x, x), 1.0, 1e-15);
  EXPECT_NEAR(cosine_similarity(x, neg), -1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(orth, orth2), 0.0);
  bool degenerate = false;
  std::vector<double> zero(50, 0.0);
  EXPECT_EQ(cosine_similarity(x, zero, {}, {}, &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
  (void)y;
}

TEST(Cosine, GradientMatchesFiniteDifference) {
  auto x = randn(20, 3);
  const auto y = randn(20, 4);
  std::vector<double> dx(20), dy(20);
  cosine_similarity(x, y, dx, dy);
  const double eps = 1e-6;
  for (int i = 0; i < 20; ++i) {
    const double s = x[i];
    x[i] = s + eps;
    const double p = cosine_similarity(x, y);
    x[i] = s - eps;
    const double m = cosine_similarity(x, y);
    x[i] = s;
    EXPECT_NEAR(dx[i], (p - m) / (2 * eps), 1e-8);
  }
}

TEST(Contrastive, ClosedForms) {
  EXPECT_NEAR(contrastive_from_similarities(0.3, 0.3, 0.3, 0.3), 2.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(contrastive_from_similarities(1.0, -1.0, -1.0, 1.0), 2.0 * std::log1p(std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(contrastive_from_similarities(1.0, 0.0, 0.0, 1.0), 0.626523, 1e-6);
}

TEST(Contrastive, TensorFormMatchesClosedForm) {
  const TensorShape s{2, 2, 2, 2, 4};
  const auto g = tensor_from(s, 1), f = tensor_from(s, 2);
  // All four pairs identical: every similarity is 1.
  EXPECT_NEAR(contrastive_loss(g, g, g, g), 2.0 * std::log(2.0), 1e-12);
  // Fp = Gp, Fn = Gn = -Gp: same-branch 1, cross -1.
  Tensor<double> ng = g;
  for (auto& v : ng.data) v = -v;
  EXPECT_NEAR(contrastive_loss(g, ng, g, ng), 2.0 * std::log1p(std::exp(-2.0)), 1e-12);
  (void)f;
}

TEST(Contrastive, ScaleInvariant) {
  const TensorShape s{2, 2, 2, 2, 3};
  const auto gp = tensor_from(s, 1), gn = tensor_from(s, 2), fp = tensor_from(s, 3), fn = tensor_from(s, 4);
  Tensor<double> scaled = fp;
  for (auto& v : scaled.data) v *= 7.5;
  EXPECT_NEAR(contrastive_loss(gp, gn, fp, fn), contrastive_loss(gp, gn, scaled, fn), 1e-12);
}

TEST(Contrastive, GradientMatchesFiniteDifference) {
  const TensorShape s{2, 2, 2, 1, 3};
  auto gp = tensor_from(s, 1), gn = tensor_from(s, 2), fp = tensor_from(s, 3), fn = tensor_from(s, 4);
  ArtifactGrads<double> g;
  contrastive_loss(gp, gn, fp, fn, &g);
  const double eps = 1e-6;
  auto check = [&](Tensor<double>& t, const Tensor<double>& grad) {
    for (std::size_t i = 0; i < t.size(); i += 3) {
      const double v = t.data[i];
      t.data[i] = v + eps;
      const double p = contrastive_loss(gp, gn, fp, fn);
      t.data[i] = v - eps;
      const double m = contrastive_loss(gp, gn, fp, fn);
      t.data[i] = v;
      EXPECT_NEAR(grad.data[i], (p - m) / (2 * eps), 1e-8);
    }
  };
  check(gp, g.guide_pos);
  check(gn, g.guide_neg);
  check(fp, g.f_pos);
  check(fn, g.f_neg);
}

TEST(L2, Values) {
  const auto p = randn(64, 1), n = randn(64, 2);
  EXPECT_EQ(l2_loss(p, n, p, n), 0.0);
  std::vector<double> shifted(p);
  for (auto& v : shifted) v += 0.3;
  EXPECT_NEAR(l2_loss(shifted, n, p, n), 0.09, 1e-12);
  // Mean semantics: tiling the patch leaves the value unchanged.
  std::vector<double> p2(p), n2(n), s2(shifted);
  p2.insert(p2.end(), p.begin(), p.end());
  n2.insert(n2.end(), n.begin(), n.end());
  s2.insert(s2.end(), shifted.begin(), shifted.end());
  EXPECT_NEAR(l2_loss(s2, n2, p2, n2), l2_loss(shifted, n, p, n), 1e-14);
}

struct Case {
  SourcePair src;
  AcquisitionSet acq;
  DipoleKernel kernel;
};

Case consistent_case(std::uint64_t seed) {
  const Dims d{8, 8, 8};
  SourcePair s{testing::random_volume(d, seed, 0.0, 0.1), testing::random_volume(d, seed + 1, -0.1, 0.0)};
  const DecayKernelMap a(testing::random_volume(d, seed + 2, 80.0, 120.0));
  AcquisitionSet acq = forward_model(s, a, MaskVolume(d, {}, true));
  return {s, acq, dipole_kernel(d, {})};
}

TEST(ModelLoss, ZeroOnGeneratingSources) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Case c = consistent_case(10 * seed);
    for (Norm norm : {Norm::kL1, Norm::kL2}) {
      EXPECT_LT(model_loss(c.src.chi_pos.data(), c.src.chi_neg.data(), c.acq, c.kernel, norm, false), 1e-10);
    }
  }
}

TEST(ModelLoss, ZeroOutputsGiveMeanAbsoluteInputs) {
  const Case c = consistent_case(3);
  const std::vector<double> zero(c.acq.qsm.size(), 0.0);
  double expect = 0.0;
  const double n = double(zero.size());
  for (std::size_t i = 0; i < zero.size(); ++i) {
    expect += (std::abs(c.acq.qsm[i]) + std::abs(c.acq.local_field[i]) + std::abs(c.acq.r2_prime[i])) / n;
  }
  EXPECT_NEAR(model_loss(zero, zero, c.acq, c.kernel, Norm::kL1, false), expect, 1e-12);
}

TEST(ModelLoss, PerturbationIncreasesLoss) {
  const Case c = consistent_case(5);
  std::vector<double> p(c.src.chi_pos.data().begin(), c.src.chi_pos.data().end());
  p[17] += 0.01;
  EXPECT_GT(model_loss(p, c.src.chi_neg.data(), c.acq, c.kernel, Norm::kL1, false), 1e-6);
}

TEST(ModelLoss, GradientMatchesFiniteDifference) {
  const Case c = consistent_case(7);
  for (Norm norm : {Norm::kL1, Norm::kL2}) {
    auto p = randn(512, 1), n = randn(512, 2);
    for (auto& v : p) v *= 0.05;
    for (auto& v : n) v *= 0.05;
    std::vector<double> dp(512), dn(512);
    model_loss(p, n, c.acq, c.kernel, norm, false, dp, dn);
    const double eps = 1e-7;
    for (std::size_t i = 0; i < 512; i += 37) {
      const double v = p[i];
      p[i] = v + eps;
      const double lp = model_loss(p, n, c.acq, c.kernel, norm, false);
      p[i] = v - eps;
      const double lm = model_loss(p, n, c.acq, c.kernel, norm, false);
      p[i] = v;
      EXPECT_NEAR(dp[i], (lp - lm) / (2 * eps), 1e-5 * std::max(1.0, std::abs(dp[i])));
    }
  }
}

TEST(ModelLoss, MaskRestrictsMeans) {
  Case c = consistent_case(9);
  std::vector<double> p(c.src.chi_pos.data().begin(), c.src.chi_pos.data().end());
  c.acq.mask = MaskVolume(c.acq.dims(), {}, false);
  c.acq.mask.set(0, true);
  p[100] += 1.0;  // outside the mask; qsm residual there is ignored
  const double masked = model_loss(p, c.src.chi_neg.data(), c.acq, c.kernel, Norm::kL1, true);
  const double full = model_loss(p, c.src.chi_neg.data(), c.acq, c.kernel, Norm::kL1, false);
  EXPECT_GT(full, masked);
}

TEST(GradientLoss, Invariances) {
  const Dims d{6, 5, 4};
  const Volume3D g = testing::random_volume(d, 1);
  std::vector<double> shifted(g.data().begin(), g.data().end()), mirrored(shifted);
  for (auto& v : shifted) v += 2.5;
  for (auto& v : mirrored) v = -v;
  EXPECT_EQ(gradient_loss(d, g.data(), g.data(), Norm::kL1), 0.0);
  EXPECT_NEAR(gradient_loss(d, shifted, g.data(), Norm::kL1), 0.0, 1e-14);
  EXPECT_NEAR(gradient_loss(d, mirrored, g.data(), Norm::kL1), 0.0, 1e-14);
  const Volume3D u = testing::random_volume(d, 2);
  EXPECT_GT(gradient_loss(d, u.data(), g.data(), Norm::kL1), 0.0);
}

TEST(GradientLoss, GradientMatchesFiniteDifference) {
  const Dims d{5, 4, 3};
  auto u = randn(d.count(), 1);
  const auto g = randn(d.count(), 2);
  for (Norm norm : {Norm::kL1, Norm::kL2}) {
    std::vector<double> du(d.count());
    gradient_loss(d, u, g, norm, nullptr, du);
    const double eps = 1e-7;
    for (std::size_t i = 0; i < u.size(); i += 5) {
      const double v = u[i];
      u[i] = v + eps;
      const double lp = gradient_loss(d, u, g, norm);
      u[i] = v - eps;
      const double lm = gradient_loss(d, u, g, norm);
      u[i] = v;
      EXPECT_NEAR(du[i], (lp - lm) / (2 * eps), 1e-6);
    }
  }
}

TEST(Composite, PerfectPredictionLeavesContrastOnly) {
  const Case c = consistent_case(11);
  const Dims d = c.acq.dims();
  ForwardArtifacts<double> art;
  art.chi_pos = Tensor<double>({1, d.nx, d.ny, d.nz, 1});
  art.chi_neg = Tensor<double>({1, d.nx, d.ny, d.nz, 1});
  for (std::size_t i = 0; i < d.count(); ++i) {
    art.chi_pos.data[i] = c.src.chi_pos[i];
    art.chi_neg.data[i] = c.src.chi_neg[i];
  }
  const TensorShape fs{1, 1, 1, 1, 4};
  art.guide_pos = tensor_from(fs, 1);
  art.guide_neg = tensor_from(fs, 2);
  art.f_pos = tensor_from(fs, 3);
  art.f_neg = tensor_from(fs, 4);
  const PhysicalTarget t{c.src.chi_pos, c.src.chi_neg, c.acq};
  const PhysicalTarget* targets[] = {&t};
  const LossBreakdown b = composite_loss<double>(art, targets, c.kernel, {});
  EXPECT_LT(b.l2, 1e-20);
  EXPECT_LT(b.model, 1e-10);
  EXPECT_EQ(b.gradient, 0.0);
  EXPECT_NEAR(b.total, b.contrast, 1e-10);

  // Away from the perfect case the total is the weighted sum of the terms.
  for (auto& v : art.chi_pos.data) v += 0.05;
  const LossBreakdown r = composite_loss<double>(art, targets, c.kernel, {});
  EXPECT_NEAR(r.total, 1.0 * r.contrast + 1.0 * r.l2 + 0.5 * r.model + 0.1 * r.gradient, 1e-14);
  EXPECT_NEAR(r.l2, 0.0025, 1e-12);

  LossOptions zero;
  zero.weights = {0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(composite_loss<double>(art, targets, c.kernel, zero).total, 0.0);
}

TEST(Weights, ValidationAndJson) {
  LossWeights w{1.0, 2.0, 0.25, 0.0};
  EXPECT_EQ(LossWeights::from_json(w.to_json()).gamma, 0.25);
  EXPECT_THROW((LossWeights{-1.0, 1.0, 1.0, 1.0}.validate()), InvalidArgument);
  auto j = w.to_json();
  j["epsilon"] = 1.0;
  EXPECT_THROW(LossWeights::from_json(j), InvalidArgument);
  EXPECT_EQ(parse_norm("l2"), Norm::kL2);
  EXPECT_THROW(parse_norm("l3"), InvalidArgument);
}

}  // namespace
}  // namespace chisep

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "chisep/errors.hpp"
#include "chisep/losses.hpp"
#include "chisep/network.hpp"
#include "chisep/physics.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

template <typename T>
Tensor<T> random_input(int n, int d, std::uint64_t seed) {
  Tensor<T> x({n, d, d, d, 3});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : x.data) v = static_cast<T>(g(rng));
  return x;
}

std::vector<PhysicalTarget> random_targets(int n, int d, std::uint64_t seed) {
  std::vector<PhysicalTarget> out;
  const Dims dims{d, d, d};
  for (int b = 0; b < n; ++b) {
    Volume3D pos = testing::random_volume(dims, seed + 10 * b, 0.0, 0.1);
    Volume3D neg = testing::random_volume(dims, seed + 10 * b + 1, -0.05, 0.0);
    Volume3D a = testing::random_volume(dims, seed + 10 * b + 2, 80.0, 120.0);
    MaskVolume mask(dims, VoxelSize{}, true);
    SourcePair src{pos, neg};
    AcquisitionSet acq = forward_model(src, DecayKernelMap(a), mask);
    // Perturb targets so the residuals are away from the L1 kinks.
    Volume3D lp = testing::random_volume(dims, seed + 10 * b + 3, 0.0, 0.1);
    Volume3D ln = testing::random_volume(dims, seed + 10 * b + 4, -0.05, 0.0);
    out.push_back({lp, ln, acq});
  }
  return out;
}

TEST(NetworkConfig, RejectsPatchNotDivisibleByEight) {
  NetworkConfig c;
  c.patch = {33, 32, 32};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.patch = {32, 32, 32};
  c.base_channels = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Network, ShapesForDeskConfig) {
  NetworkConfig cfg;  // c = 16, 32^3
  DualBranchNet<float> net(cfg);
  net.init(1);
  const auto art = net.forward(random_input<float>(1, 32, 3), PassMode{});
  const TensorShape out{1, 32, 32, 32, 1};
  const TensorShape feat{1, 4, 4, 4, 64};
  EXPECT_EQ(art.chi_pos.shape, out);
  EXPECT_EQ(art.chi_neg.shape, out);
  for (const auto* t : {&art.guide_pos, &art.guide_neg, &art.f_pos, &art.f_neg, &art.f_v}) EXPECT_EQ(t->shape, feat);
  EXPECT_EQ(art.skips[0].shape, (TensorShape{1, 32, 32, 32, 16}));
  EXPECT_EQ(art.skips[1].shape, (TensorShape{1, 16, 16, 16, 32}));
  EXPECT_EQ(art.skips[2].shape, (TensorShape{1, 8, 8, 8, 64}));
  for (float v : art.chi_pos.data) ASSERT_TRUE(std::isfinite(v));
}

TEST(Network, RejectsWrongChannelCount) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {8, 8, 8};
  DualBranchNet<float> net(cfg);
  Tensor<float> x({1, 8, 8, 8, 2});
  EXPECT_THROW(net.forward(x, PassMode{}), InvalidArgument);
  Tensor<float> y({1, 12, 8, 8, 3});
  EXPECT_THROW(net.forward(y, PassMode{}), InvalidArgument);
}

TEST(Network, InitStatistics) {
  NetworkConfig cfg;
  DualBranchNet<double> net(cfg);
  net.init(42);
  bool checked_large = false;
  for (Param<double>* p : net.all_tensors()) {
    if (p->gaussian_init) {
      if (p->size() >= 10000) {
        double s = 0.0, ss = 0.0;
        for (double v : p->value) {
          s += v;
          ss += v * v;
        }
        const double n = static_cast<double>(p->size());
        const double sd = std::sqrt(ss / n - (s / n) * (s / n));
        EXPECT_GE(sd, 0.009) << p->name;
        EXPECT_LE(sd, 0.011) << p->name;
        checked_large = true;
      }
    } else if (p->name.ends_with(".gamma") || p->name.ends_with(".running_var")) {
      for (double v : p->value) ASSERT_EQ(v, 1.0) << p->name;
    } else {
      for (double v : p->value) ASSERT_EQ(v, 0.0) << p->name;
    }
  }
  EXPECT_TRUE(checked_large);
}

TEST(Network, SameSeedSameParameters) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {8, 8, 8};
  DualBranchNet<float> a(cfg), b(cfg), c(cfg);
  a.init(5);
  b.init(5);
  c.init(6);
  auto pa = a.all_tensors(), pb = b.all_tensors(), pc = c.all_tensors();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
    differs |= pa[i]->value != pc[i]->value;
  }
  EXPECT_TRUE(differs);
}

TEST(Network, TensorNamesAreUnique) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {8, 8, 8};
  DualBranchNet<float> net(cfg);
  std::set<std::string> names;
  for (auto* p : net.all_tensors()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  EXPECT_TRUE(names.count("enc1.block0.layer0.conv.weight"));
  EXPECT_TRUE(names.count("fuse_pos.gate.weight"));
  EXPECT_TRUE(names.count("dec_neg.head.weight"));
  EXPECT_TRUE(names.count("enc2.block2.layer1.bn.running_var"));
}

TEST(Network, EvalModeIsDeterministic) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {16, 16, 16};
  DualBranchNet<float> net(cfg);
  net.init(3);
  const auto x = random_input<float>(2, 16, 9);
  const auto a = net.forward(x, PassMode{});
  const auto b = net.forward(x, PassMode{});
  EXPECT_EQ(a.chi_pos.data, b.chi_pos.data);
  EXPECT_EQ(a.chi_neg.data, b.chi_neg.data);
}

TEST(Network, DecoderBranchesAreIndependent) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {8, 8, 8};
  DualBranchNet<double> net(cfg);
  net.init(11);
  const auto x = random_input<double>(1, 8, 2);
  const auto before = net.forward(x, PassMode{});
  for (Param<double>* p : net.params()) {
    if (p->name.starts_with("dec_pos.")) {
      for (auto& v : p->value) v += 0.05;
    }
  }
  const auto after = net.forward(x, PassMode{});
  EXPECT_EQ(before.chi_neg.data, after.chi_neg.data);
  EXPECT_NE(before.chi_pos.data, after.chi_pos.data);
}

TEST(Network, FusionGateLimits) {
  const int c = 4;
  Fusion<double> f("f", c);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto* conv : {&f.conv_guide, &f.conv_feat})
    for (auto& v : conv->weight.value) v = g(rng);
  Tensor<double> guide({1, 2, 2, 2, c}), fv({1, 2, 2, 2, c});
  for (auto& v : guide.data) v = g(rng);
  for (auto& v : fv.data) v = g(rng);
  const PassMode eval{};

  // Saturated gate: bias of +/-1000 drives sigmoid to 1 / 0.
  for (auto& b : f.conv_gate.bias.value) b = 1000.0;
  f.forward(guide, fv, eval);
  for (double a : f.gate().data) EXPECT_DOUBLE_EQ(a, 1.0);
  const auto only_guide = f.forward(guide, fv, eval);
  Tensor<double> fv2 = fv;
  for (auto& v : fv2.data) v += 1.0;
  EXPECT_EQ(only_guide.data, f.forward(guide, fv2, eval).data);

  for (auto& b : f.conv_gate.bias.value) b = -1000.0;
  const auto only_feat = f.forward(guide, fv, eval);
  Tensor<double> guide2 = guide;
  for (auto& v : guide2.data) v += 1.0;
  // Gate conv input changes but its output stays saturated at 0.
  EXPECT_EQ(only_feat.data, f.forward(guide2, fv, eval).data);
}

// Directional derivative of the composite loss through the whole network
// against a central finite difference, in double precision.
TEST(Network, CompositeLossGradientMatchesFiniteDifference) {
  NetworkConfig cfg;
  cfg.base_channels = 4;
  cfg.patch = {8, 8, 8};
  DualBranchNet<double> net(cfg);
  net.init(2024);
  const auto x = random_input<double>(2, 8, 77);
  const auto targets = random_targets(2, 8, 500);
  std::vector<const PhysicalTarget*> tp{&targets[0], &targets[1]};
  const DipoleKernel kernel = dipole_kernel({8, 8, 8}, VoxelSize{});
  const LossOptions opts{};
  const PassMode mode{true, false, true};

  auto loss = [&]() {
    const auto art = net.forward(x, mode);
    return composite_loss<double>(art, tp, kernel, opts).total;
  };

  const auto art = net.forward(x, mode);
  ArtifactGrads<double> g;
  composite_loss<double>(art, tp, kernel, opts, &g);
  net.zero_grad();
  net.backward(g);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto params = net.params();
  std::vector<std::vector<double>> dir;
  double norm2 = 0.0;
  for (auto* p : params) {
    std::vector<double> v(p->size());
    for (auto& e : v) {
      e = nd(rng);
      norm2 += e * e;
    }
    dir.push_back(std::move(v));
  }
  // Unit direction keeps the probe step short enough not to cross ReLU and
  // max-pool kinks (activations start near zero with the 0.01 init).
  double analytic = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < dir[k].size(); ++i) {
      dir[k][i] /= std::sqrt(norm2);
      analytic += dir[k][i] * params[k]->grad[i];
    }
  auto shift = [&](double eps) {
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < dir[k].size(); ++i) params[k]->value[i] += eps * dir[k][i];
  };
  const double eps = 1e-6;
  shift(eps);
  const double lp = loss();
  shift(-2 * eps);
  const double lm = loss();
  shift(eps);
  const double fd = (lp - lm) / (2 * eps);
  const double rel = std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic));
  EXPECT_LT(rel, 1e-4) << "fd " << fd << " analytic " << analytic;
}

}  // namespace
}  // namespace chisep

#include <gtest/gtest.h>

#include <fstream>

#include "chisep/checkpoint.hpp"
#include "chisep/errors.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

NetworkConfig tiny() {
  NetworkConfig c;
  c.base_channels = 4;
  c.patch = {8, 8, 8};
  return c;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Checkpoint, RoundTripRestoresEveryTensor) {
  testing::TempDir dir("ckpt");
  DualBranchNet<float> net(tiny());
  net.init(3);
  NormStats norm;
  norm.mean = {1.0, 2.0, 3.0};
  norm.std = {0.5, 0.25, 2.0};
  write_checkpoint(make_checkpoint(net, norm, {{"epoch", 4}}), dir.path() / "a.ckpt");
  const Checkpoint back = read_checkpoint(dir.path() / "a.ckpt");
  ASSERT_TRUE(back.norm.has_value());
  EXPECT_EQ(back.norm->std[2], 2.0);
  EXPECT_EQ(back.meta["epoch"], 4);
  EXPECT_EQ(back.network.base_channels, 4);

  DualBranchNet<float> other(back.network);
  other.init(99);
  load_into(back, other);
  const auto a = net.all_tensors(), b = other.all_tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;

  // Writing the loaded checkpoint again reproduces the bytes.
  write_checkpoint(back, dir.path() / "b.ckpt");
  EXPECT_EQ(read_all(dir.path() / "a.ckpt"), read_all(dir.path() / "b.ckpt"));
}

TEST(Checkpoint, DoubleNetworkLoadsFloatPayload) {
  testing::TempDir dir("ckpt");
  DualBranchNet<double> net(tiny());
  net.init(1);
  write_checkpoint(make_checkpoint(net, std::nullopt, {}), dir.path() / "a.ckpt");
  const Checkpoint back = read_checkpoint(dir.path() / "a.ckpt");
  EXPECT_FALSE(back.norm.has_value());
  DualBranchNet<double> other(back.network);
  load_into(back, other);
  const auto a = net.params(), b = other.params();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i]->size(); ++k) ASSERT_EQ(static_cast<float>(a[i]->value[k]), b[i]->value[k]);
}

TEST(Checkpoint, MismatchedArchitecture) {
  DualBranchNet<float> net(tiny());
  net.init(1);
  const Checkpoint c = make_checkpoint(net, std::nullopt, {});
  NetworkConfig wide = tiny();
  wide.base_channels = 8;
  DualBranchNet<float> other(wide);
  EXPECT_THROW(load_into(c, other), InvalidArgument);
}

TEST(Checkpoint, CorruptFiles) {
  testing::TempDir dir("ckpt");
  DualBranchNet<float> net(tiny());
  net.init(1);
  write_checkpoint(make_checkpoint(net, std::nullopt, {}), dir.path() / "a.ckpt");
  std::string bytes = read_all(dir.path() / "a.ckpt");

  std::string bad = bytes;
  bad[0] = 'Z';
  std::ofstream(dir.path() / "magic.ckpt", std::ios::binary) << bad;
  EXPECT_THROW(read_checkpoint(dir.path() / "magic.ckpt"), FormatError);

  std::ofstream(dir.path() / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  EXPECT_THROW(read_checkpoint(dir.path() / "short.ckpt"), FormatError);

  EXPECT_THROW(read_checkpoint(dir.path() / "missing.ckpt"), IoError);
}

}  // namespace
}  // namespace chisep

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/training.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

TrainConfig reference_config() {
  TrainConfig c;
  c.epochs = 100;
  return c;
}

TEST(Schedule, ReferenceValues) {
  const TrainConfig c = reference_config();
  EXPECT_EQ(lr_schedule(0, c), 1e-3);
  EXPECT_EQ(lr_schedule(29, c), 1e-3);
  EXPECT_EQ(lr_schedule(30, c), 1e-4);
  EXPECT_EQ(lr_schedule(45, c), 1e-4);
  EXPECT_EQ(lr_schedule(60, c), 1e-5);
  EXPECT_EQ(lr_schedule(99, c), 1e-5);
  EXPECT_THROW(lr_schedule(100, c), InvalidArgument);
  EXPECT_THROW(lr_schedule(-1, c), InvalidArgument);
}

TEST(Schedule, DeskScalesProportionally) {
  TrainConfig c;
  c.epochs = 20;
  EXPECT_EQ(c.breakpoints(), (std::vector<int>{6, 12}));
  EXPECT_EQ(lr_schedule(5, c), 1e-3);
  EXPECT_EQ(lr_schedule(6, c), 1e-4);
  EXPECT_EQ(lr_schedule(19, c), 1e-5);
}

TEST(Schedule, ExplicitBreakpoints) {
  TrainConfig c;
  c.epochs = 10;
  c.lr_breakpoints = {2, 5};
  EXPECT_EQ(lr_schedule(1, c), 1e-3);
  EXPECT_EQ(lr_schedule(2, c), 1e-4);
  EXPECT_EQ(lr_schedule(5, c), 1e-5);
  c.lr_breakpoints = {5, 2};
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, Guards) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.contrastive_enabled = false;
  EXPECT_EQ(c.effective_weights().alpha, 0.0);
  EXPECT_EQ(c.effective_weights().beta, 1.0);
  auto j = TrainConfig{}.to_json();
  EXPECT_EQ(TrainConfig::from_json(j).to_json(), j);
  j["momentum"] = 0.9;
  EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
}

TEST(Split, SeedStableDisjointCover) {
  std::vector<std::size_t> tr, va, tr2, va2;
  split_indices(64, 0.1, 5, tr, va);
  split_indices(64, 0.1, 5, tr2, va2);
  EXPECT_EQ(tr, tr2);
  EXPECT_EQ(va, va2);
  EXPECT_EQ(va.size(), 6u);
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(va.begin(), va.end());
  EXPECT_EQ(all.size(), 64u);
  split_indices(2, 0.1, 1, tr, va);
  EXPECT_EQ(tr.size(), 1u);
  EXPECT_EQ(va.size(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Param<double> p("w", {2}, 0.0, true, false);
  p.grad = {3.0, -0.5};
  Adam<double> opt({&p}, 0.9, 0.999, 1e-8);
  opt.step(0.01);
  EXPECT_NEAR(p.value[0], -0.01, 1e-9);
  EXPECT_NEAR(p.value[1], 0.01, 1e-9);
}

class TinyTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("train");
    SynthConfig s;
    s.phantom_dims = {16, 16, 16};
    s.window = {8, 8, 8};
    s.stride = {8, 8, 8};
    build_training_set(1, 4, s, dir_->path());
  }
  static void TearDownTestSuite() { delete dir_; }

  static TrainResult run(const std::filesystem::path& out, bool contrastive = true) {
    NetworkConfig n;
    n.base_channels = 4;
    n.patch = {8, 8, 8};
    TrainConfig t;
    t.epochs = 2;
    t.seed = 3;
    t.precision = Precision::kDouble;
    t.contrastive_enabled = contrastive;
    return train(read_manifest(dir_->path() / "manifest.json"), n, t, out);
  }
  static testing::TempDir* dir_;
};
testing::TempDir* TinyTraining::dir_ = nullptr;

TEST_F(TinyTraining, DeterministicHistoryAndCheckpoint) {
  testing::TempDir a("run"), b("run");
  const TrainResult ra = run(a.path()), rb = run(b.path());
  ASSERT_EQ(ra.history.epochs.size(), 2u);
  EXPECT_EQ(ra.history.to_json().dump(), rb.history.to_json().dump());
  for (const auto& e : ra.history.epochs) {
    EXPECT_TRUE(e.train.all_finite());
    EXPECT_TRUE(e.val.all_finite());
  }
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(slurp(a.path() / "history.json"), slurp(b.path() / "history.json"));
  EXPECT_EQ(slurp(a.path() / "checkpoint.ckpt"), slurp(b.path() / "checkpoint.ckpt"));
  EXPECT_EQ(ra.history.train_indices.size() + ra.history.val_indices.size(), 16u);
}

TEST_F(TinyTraining, AblationOnlyChangesAlpha) {
  testing::TempDir a("run"), b("run");
  const TrainResult with = run(a.path(), true), without = run(b.path(), false);
  EXPECT_EQ(with.history.val_indices, without.history.val_indices);
  EXPECT_GT(without.history.epochs[0].train.contrast, 0.0);  // still reported
  EXPECT_NE(with.history.to_json().dump(), without.history.to_json().dump());
}

TEST_F(TinyTraining, PatchMismatchRejected) {
  NetworkConfig n;
  n.base_channels = 4;
  n.patch = {16, 16, 16};
  EXPECT_THROW(train(read_manifest(dir_->path() / "manifest.json"), n, TrainConfig{}), InvalidArgument);
}

TEST(History, JsonRoundTrip) {
  TrainHistory h;
  EpochRecord r;
  r.epoch = 0;
  r.lr = 1e-3;
  r.train.total = 1.25;
  r.val.model = 0.5;
  h.epochs.push_back(r);
  h.train_indices = {0, 2};
  h.val_indices = {1};
  EXPECT_EQ(TrainHistory::from_json(h.to_json()).to_json(), h.to_json());
}

}  // namespace
}  // namespace chisep

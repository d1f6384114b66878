#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/physics.hpp"
#include "chisep/synth.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

namespace fs = std::filesystem;

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthConfig small_config() {
  SynthConfig c;
  c.phantom_dims = {32, 32, 32};
  c.window = {16, 16, 16};
  c.stride = {16, 16, 16};
  return c;
}

TEST(Crop, CountingOracle) {
  EXPECT_EQ(crop_patches({224, 224, 128}, {64, 64, 64}, {24, 36, 20}).size(), 240u);
  EXPECT_EQ(crop_patches({32, 32, 32}, {32, 32, 32}, {5, 5, 5}).size(), 1u);
}

TEST(Crop, TilingAndCoverage) {
  const auto o = crop_origins_1d(64, 16, 16);
  EXPECT_EQ(o, (std::vector<int>{0, 16, 32, 48}));
  for (int len : {17, 40, 63})
    for (int stride : {1, 5, 16}) {
      std::vector<int> hits(len, 0);
      for (int p : crop_origins_1d(len, 16, stride))
        for (int i = p; i < p + 16; ++i) ++hits[i];
      for (int h : hits) EXPECT_GE(h, 1);
    }
  EXPECT_THROW(crop_origins_1d(8, 16, 4), InvalidArgument);
}

TEST(Synth, SampleCountAndDoubling) {
  testing::TempDir dir("synth");
  SynthConfig c;  // 64^3 phantoms, 32^3 windows, stride 32
  const DatasetManifest m = build_training_set(2, 7, c, dir.path());
  EXPECT_EQ(m.samples.size(), 32u);
  int lesioned = 0;
  for (const auto& s : m.samples) lesioned += s.lesioned ? 1 : 0;
  EXPECT_EQ(lesioned, 16);
}

TEST(Synth, StoredInputsMatchForwardModelAndAreNormalized) {
  testing::TempDir dir("synth");
  build_training_set(2, 3, small_config(), dir.path());
  const DatasetManifest m = read_manifest(dir.path() / "manifest.json");
  std::array<double, 3> sum{}, sum2{};
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const TrainingSample s = load_sample(m, i);
    EXPECT_TRUE((SourcePair{s.label_pos, s.label_neg}.satisfies_sign_convention()));
    const AcquisitionSet acq = sample_acquisition(s, m.norm);
    const AcquisitionSet re = forward_model({s.label_pos, s.label_neg}, DecayKernelMap(s.a_patch), s.mask);
    for (std::size_t v = 0; v < acq.qsm.size(); ++v) {
      ASSERT_NEAR(acq.qsm[v], re.qsm[v], 1e-6 * m.norm.std[kQsm]);
      ASSERT_NEAR(acq.local_field[v], re.local_field[v], 1e-6 * m.norm.std[kLocalField]);
      ASSERT_NEAR(acq.r2_prime[v], re.r2_prime[v], 1e-6 * m.norm.std[kR2Prime]);
    }
    for (int c = 0; c < 3; ++c)
      for (double v : s.inputs[c].data()) {
        sum[c] += v;
        sum2[c] += v * v;
      }
    n += s.mask.size();
  }
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / n;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(sum2[c] / n - mean * mean), 1.0, 1e-6);
  }
}

TEST(Synth, ByteIdenticalAcrossRunsAndWorkers) {
  testing::TempDir a("synth"), b("synth");
  SynthConfig c1 = small_config();
  SynthConfig c2 = small_config();
  c2.jobs = 2;
  build_training_set(2, 11, c1, a.path());
  build_training_set(2, 11, c2, b.path());
  EXPECT_EQ(read_all(a.path() / "manifest.json"), read_all(b.path() / "manifest.json"));
  for (const auto& e : fs::recursive_directory_iterator(a.path() / "samples")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path());
    ASSERT_EQ(read_all(e.path()), read_all(b.path() / rel)) << rel;
  }
}

TEST(Synth, MissingOutputDirectory) {
  EXPECT_THROW(build_training_set(1, 1, small_config(), "/nonexistent/chisep_out"), IoError);
}

TEST(Synth, ConfigRejectsUnknownKeys) {
  auto j = small_config().to_json();
  EXPECT_NO_THROW(SynthConfig::from_json(j));
  j["bogus"] = 1;
  EXPECT_THROW(SynthConfig::from_json(j), InvalidArgument);
}

TEST(Synth, WindowLargerThanPhantom) {
  SynthConfig c = small_config();
  c.window = {64, 64, 64};
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace chisep

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "chisep/errors.hpp"
#include "chisep/svol_io.hpp"
#include "test_util.hpp"

namespace chisep {
namespace {

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

TEST(Svol, RoundTripIsLosslessForFloat32) {
  testing::TempDir dir("svol");
  Volume3D v = testing::random_volume({16, 16, 16}, 4, -1.0, 1.0, {0.5, 0.75, 2.0});
  for (auto& x : v.data()) x = static_cast<float>(x);
  v.set_units("ppm");
  write_svol(v, dir.path() / "a.svol");
  const SvolFile f = read_svol_file(dir.path() / "a.svol");
  EXPECT_EQ(f.kind, "volume");
  EXPECT_EQ(f.volume.units(), "ppm");
  EXPECT_TRUE(f.volume.same_grid(v));
  for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(f.volume[i], v[i]);
  // Re-writing gives identical bytes.
  write_svol(f.volume, dir.path() / "b.svol");
  EXPECT_EQ(read_all(dir.path() / "a.svol"), read_all(dir.path() / "b.svol"));
}

TEST(Svol, LayoutHeader) {
  testing::TempDir dir("svol");
  write_svol(create_volume({2, 3, 4}, {}, 1.0), dir.path() / "a.svol");
  const std::string bytes = read_all(dir.path() / "a.svol");
  EXPECT_EQ(bytes.substr(0, 8), "SVOL0001");
  std::uint32_t h = 0;
  std::memcpy(&h, bytes.data() + 8, 4);
  EXPECT_EQ(bytes.size(), 12 + h + 24 * sizeof(float));
}

TEST(Svol, MaskRoundTrip) {
  testing::TempDir dir("svol");
  MaskVolume m({4, 4, 4}, {}, false);
  m.set(7, true);
  m.set(63, true);
  write_svol(m, dir.path() / "m.svol");
  EXPECT_EQ(read_svol_file(dir.path() / "m.svol").kind, "mask");
  const MaskVolume back = read_svol_mask(dir.path() / "m.svol");
  EXPECT_EQ(back.count(), 2u);
  EXPECT_TRUE(back[7] && back[63]);
}

TEST(Svol, WrongMagic) {
  testing::TempDir dir("svol");
  write_svol(create_volume({2, 2, 2}, {}, 1.0), dir.path() / "a.svol");
  std::string bytes = read_all(dir.path() / "a.svol");
  bytes[0] = 'X';
  write_all(dir.path() / "a.svol", bytes);
  EXPECT_THROW(read_svol(dir.path() / "a.svol"), FormatError);
}

TEST(Svol, PayloadSizeMismatch) {
  testing::TempDir dir("svol");
  write_svol(create_volume({4, 4, 4}, {}, 1.0), dir.path() / "a.svol");
  std::string bytes = read_all(dir.path() / "a.svol");
  bytes.resize(bytes.size() - sizeof(float));  // 63 values
  write_all(dir.path() / "a.svol", bytes);
  try {
    read_svol(dir.path() / "a.svol");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("payload size mismatch"), std::string::npos);
  }
}

TEST(Svol, NonFinitePayload) {
  testing::TempDir dir("svol");
  write_svol(create_volume({2, 2, 2}, {}, 1.0), dir.path() / "a.svol");
  std::string bytes = read_all(dir.path() / "a.svol");
  const float nan = std::nanf("");
  std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
  write_all(dir.path() / "a.svol", bytes);
  EXPECT_THROW(read_svol(dir.path() / "a.svol"), FormatError);
}

TEST(Svol, MissingFile) {
  EXPECT_THROW(read_svol("/nonexistent/chisep/a.svol"), IoError);
}

}  // namespace
}  // namespace chisep

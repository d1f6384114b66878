#include "chisep/svol_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"

namespace chisep {
namespace {

static_assert(std::endian::native == std::endian::little, ".svol I/O assumes a little-endian host");

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

std::string encode(const Dims& d, const VoxelSize& v, const std::string& units, const std::string& kind,
                   std::span<const double> values) {
  nlohmann::json header = {{"dims", {d.nx, d.ny, d.nz}},
                           {"voxel_size_mm", {v.dx, v.dy, v.dz}},
                           {"units", units},
                           {"kind", kind}};
  const std::string h = header.dump();
  std::string buf(kSvolMagic, sizeof(kSvolMagic));
  put_u32(buf, static_cast<std::uint32_t>(h.size()));
  buf += h;
  const std::size_t base = buf.size();
  buf.resize(base + values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::memcpy(buf.data() + base + i * sizeof(float), &f, sizeof(float));
  }
  return buf;
}

}  // namespace

void write_svol(const Volume3D& vol, const std::filesystem::path& path, const std::string& kind) {
  write_bytes(path, encode(vol.dims(), vol.voxel_size(), vol.units(), kind, vol.data()));
}

void write_svol(const MaskVolume& mask, const std::filesystem::path& path) {
  std::vector<double> d(mask.data().begin(), mask.data().end());
  write_bytes(path, encode(mask.dims(), mask.voxel_size(), "", "mask", d));
}

SvolFile read_svol_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 12) throw FormatError("truncated header", bytes.size());
  if (std::memcmp(p, kSvolMagic, sizeof(kSvolMagic)) != 0) throw FormatError("bad magic bytes", 0);
  const std::uint64_t hlen = get_u32(p + 8);
  if (12 + hlen > bytes.size()) throw FormatError("truncated JSON header", bytes.size());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed JSON header: ") + e.what(), 12);
  }

  Dims dims;
  VoxelSize voxel;
  std::string units, kind = "volume";
  try {
    const auto& d = header.at("dims");
    const auto& v = header.at("voxel_size_mm");
    if (d.size() != 3 || v.size() != 3) throw FormatError("dims/voxel_size_mm must have 3 entries", 12);
    dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
    voxel = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    if (header.contains("units")) units = header["units"].get<std::string>();
    if (header.contains("kind")) kind = header["kind"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid header field: ") + e.what(), 12);
  }
  try {
    validate_grid(dims, voxel);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), 12);
  }

  const std::uint64_t payload_at = 12 + hlen;
  const std::uint64_t payload = bytes.size() - payload_at;
  if (payload != dims.count() * sizeof(float)) {
    throw FormatError("payload size mismatch: expected " + std::to_string(dims.count()) + " float32 values, found " +
                          std::to_string(payload) + " bytes",
                      payload_at);
  }
  std::vector<double> values(dims.count());
  for (std::size_t i = 0; i < values.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + payload_at + i * sizeof(float), sizeof(float));
    if (!std::isfinite(f)) throw FormatError("non-finite value in payload", payload_at + i * sizeof(float));
    values[i] = f;
  }
  return SvolFile{Volume3D(dims, voxel, std::move(values), units), kind};
}

Volume3D read_svol(const std::filesystem::path& path) { return read_svol_file(path).volume; }

MaskVolume read_svol_mask(const std::filesystem::path& path) {
  return MaskVolume::from_volume(read_svol_file(path).volume);
}

}  // namespace chisep

#pragma once

#include <filesystem>
#include <string>

#include "chisep/volume.hpp"

namespace chisep {

// .svol layout (all integers little-endian):
//   bytes 0..7   magic "SVOL0001"
//   bytes 8..11  uint32 header length H
//   next H bytes UTF-8 JSON: {"dims":[nx,ny,nz],"voxel_size_mm":[dx,dy,dz],
//                             "units":"...","kind":"volume"|"mask"}
//   payload      nx*ny*nz float32, x fastest
inline constexpr char kSvolMagic[8] = {'S', 'V', 'O', 'L', '0', '0', '0', '1'};

struct SvolFile {
  Volume3D volume;
  std::string kind = "volume";
};

void write_svol(const Volume3D& vol, const std::filesystem::path& path, const std::string& kind = "volume");
void write_svol(const MaskVolume& mask, const std::filesystem::path& path);

// Throws FormatError (with byte offset) on bad magic, truncated data, payload
// size mismatch or non-finite values; IoError if the file can't be opened.
SvolFile read_svol_file(const std::filesystem::path& path);
Volume3D read_svol(const std::filesystem::path& path);
MaskVolume read_svol_mask(const std::filesystem::path& path);

}  // namespace chisep

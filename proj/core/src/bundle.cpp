#include "chisep/bundle.hpp"

#include "chisep/errors.hpp"
#include "chisep/svol_io.hpp"

namespace chisep {
namespace fs = std::filesystem;

namespace {

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("directory does not exist", dir.string());
}

}  // namespace

void write_acquisition(const AcquisitionSet& acq, const fs::path& dir) {
  require_dir(dir);
  acq.validate();
  write_svol(acq.r2_prime, dir / "r2_prime.svol", "r2_prime");
  write_svol(acq.local_field, dir / "local_field.svol", "local_field");
  write_svol(acq.qsm, dir / "qsm.svol", "qsm");
  write_svol(acq.a_map.volume(), dir / "a_map.svol", "a_map");
  write_svol(acq.mask, dir / "mask.svol");
}

AcquisitionSet read_acquisition(const fs::path& dir) {
  require_dir(dir);
  AcquisitionSet acq{read_svol(dir / "local_field.svol"), read_svol(dir / "r2_prime.svol"), read_svol(dir / "qsm.svol"),
                     DecayKernelMap(read_svol(dir / "a_map.svol")), read_svol_mask(dir / "mask.svol")};
  acq.validate();
  return acq;
}

void write_sources(const SourcePair& src, const fs::path& dir) {
  require_dir(dir);
  require_same_grid(src.chi_pos, src.chi_neg, "write_sources");
  write_svol(src.chi_pos, dir / "chi_pos.svol", "chi_pos");
  write_svol(src.chi_neg, dir / "chi_neg.svol", "chi_neg");
}

SourcePair read_sources(const fs::path& dir) {
  require_dir(dir);
  SourcePair s{read_svol(dir / "chi_pos.svol"), read_svol(dir / "chi_neg.svol")};
  require_same_grid(s.chi_pos, s.chi_neg, "read_sources");
  return s;
}

}  // namespace chisep

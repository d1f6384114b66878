#pragma once

#include <filesystem>

#include "chisep/physics.hpp"

namespace chisep {

/// Directory layouts shared by the CLI commands.
///   acquisition: r2_prime.svol local_field.svol qsm.svol a_map.svol mask.svol
///   sources:     chi_pos.svol chi_neg.svol
void write_acquisition(const AcquisitionSet& acq, const std::filesystem::path& dir);
AcquisitionSet read_acquisition(const std::filesystem::path& dir);

void write_sources(const SourcePair& src, const std::filesystem::path& dir);
SourcePair read_sources(const std::filesystem::path& dir);

}  // namespace chisep

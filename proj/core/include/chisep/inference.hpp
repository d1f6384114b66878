#pragma once

#include <optional>

#include "chisep/network.hpp"
#include "chisep/physics.hpp"
#include "chisep/synth.hpp"

namespace chisep {

struct InferenceOptions {
  Dims window{32, 32, 32};
  Index3 stride{0, 0, 0};  // 0 on an axis means window / 2
  bool clamp = false;      // force chi_pos >= 0 and chi_neg <= 0
};

/// Sliding-window inference over a whole acquisition: inputs normalized with
/// `norm`, overlapping patch predictions averaged with uniform weights, then
/// masked by acq.mask.
template <typename T>
SourcePair infer_volume(DualBranchNet<T>& net, const AcquisitionSet& acq, const std::optional<NormStats>& norm,
                        const InferenceOptions& opts = {});

// The network input tensor [1, size, 3] of a crop of `acq`.
template <typename T>
Tensor<T> normalized_patch(const AcquisitionSet& acq, const NormStats& norm, const Index3& origin, const Dims& size);

}  // namespace chisep

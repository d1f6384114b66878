#pragma once

#include "chisep/checkpoint.hpp"
#include "chisep/inference.hpp"
#include "chisep/training.hpp"

namespace chisep::cli {

// Precision recorded by the training run; float when absent.
Precision checkpoint_precision(const Checkpoint& ckpt);

/// Builds the checkpoint's network in its training precision and runs
/// sliding-window inference.
SourcePair predict(const Checkpoint& ckpt, const AcquisitionSet& acq, const InferenceOptions& opts);

}  // namespace chisep::cli

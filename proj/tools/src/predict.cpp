#include "predict.hpp"

namespace chisep::cli {
namespace {

template <typename T>
SourcePair run(const Checkpoint& ckpt, const AcquisitionSet& acq, const InferenceOptions& opts) {
  DualBranchNet<T> net(ckpt.network);
  load_into(ckpt, net);
  return infer_volume(net, acq, ckpt.norm, opts);
}

}  // namespace

Precision checkpoint_precision(const Checkpoint& ckpt) {
  if (ckpt.meta.contains("train") && ckpt.meta["train"].contains("precision")) {
    return parse_precision(ckpt.meta["train"]["precision"].get<std::string>());
  }
  return Precision::kFloat;
}

SourcePair predict(const Checkpoint& ckpt, const AcquisitionSet& acq, const InferenceOptions& opts) {
  return checkpoint_precision(ckpt) == Precision::kDouble ? run<double>(ckpt, acq, opts)
                                                          : run<float>(ckpt, acq, opts);
}

}  // namespace chisep::cli

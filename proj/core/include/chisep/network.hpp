#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chisep/layers.hpp"
#include "chisep/volume.hpp"

namespace chisep {

struct NetworkConfig {
  static constexpr int kDepth = 3;

  int base_channels = 16;
  Dims patch{32, 32, 32};

  // Patch dims divisible by 8, base_channels >= 4.
  void validate() const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
};

/// Everything one forward pass produces. Feature tensors (guide_*, f_*,
/// f_v) share the bottleneck shape [n, patch/8, 4c].
template <typename T>
struct ForwardArtifacts {
  Tensor<T> chi_pos;
  Tensor<T> chi_neg;
  Tensor<T> guide_pos;
  Tensor<T> guide_neg;
  Tensor<T> f_pos;
  Tensor<T> f_neg;
  Tensor<T> f_v;
  std::array<Tensor<T>, 3> skips;  // Enc1 pre-pool activations, full to 1/4 resolution
};

// Loss gradients w.r.t. the artifacts. Empty tensors count as zero.
template <typename T>
struct ArtifactGrads {
  Tensor<T> chi_pos;
  Tensor<T> chi_neg;
  Tensor<T> guide_pos;
  Tensor<T> guide_neg;
  Tensor<T> f_pos;
  Tensor<T> f_neg;
};

template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, int cin, int cout);
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Param<T>*>& out) { bn.collect_buffers(out); }

  Conv3<T> conv;
  BatchNorm<T> bn;
  ReLU<T> relu;
};

/// Three blocks of [conv-BN-ReLU] x2 + 2^3 max-pool; channels c, 2c, 4c.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const std::string& name, int cin, int base);
  // Writes the pre-pool activations into `skips` when non-null.
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode, std::array<Tensor<T>, 3>* skips);
  // `dskips` may be null (no skip gradients). Input gradient is not formed.
  void backward(const Tensor<T>& dbottleneck, const std::array<Tensor<T>, 3>* dskips);
  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Param<T>*>& out);

 private:
  std::array<ConvBnRelu<T>, 6> layers_;
  std::array<MaxPool2<T>, 3> pools_;
};

/// Gated feature integration:
///   a = sigmoid(conv_gate(guide)),
///   mix = conv_guide(guide) * a + conv_feat(f_v) * (1 - a),
/// then BN and two [conv-BN-ReLU] blocks.
template <typename T>
class Fusion {
 public:
  Fusion() = default;
  Fusion(const std::string& name, int channels);
  Tensor<T> forward(const Tensor<T>& guide, const Tensor<T>& f_v, const PassMode& mode);
  void backward(const Tensor<T>& dy, Tensor<T>& dguide, Tensor<T>& df_v);
  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Param<T>*>& out);
  const Tensor<T>& gate() const noexcept { return alpha_; }

  Conv3<T> conv_gate;
  Conv3<T> conv_guide;
  Conv3<T> conv_feat;
  BatchNorm<T> bn;
  ConvBnRelu<T> block0;
  ConvBnRelu<T> block1;

 private:
  Tensor<T> alpha_;
  Tensor<T> vg_;
  Tensor<T> vf_;
};

/// Three blocks of [2^3 transposed conv -> concat Enc1 skip -> [conv-BN-ReLU] x2]
/// and a 1x1x1 head to one channel.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const std::string& name, int base);
  Tensor<T> forward(const Tensor<T>& feature, const std::array<Tensor<T>, 3>& skips, const PassMode& mode);
  // Adds skip gradients into `dskips` (which must be allocated).
  Tensor<T> backward(const Tensor<T>& dy, std::array<Tensor<T>, 3>& dskips);
  void collect(std::vector<Param<T>*>& out);
  void collect_buffers(std::vector<Param<T>*>& out);

 private:
  std::array<ConvT2<T>, 3> up_;
  std::array<ConvBnRelu<T>, 6> layers_;
  std::array<int, 3> up_channels_{};
  Conv1<T> head_;
};

/// Dual-branch network: Enc1 on the 3-channel input, Enc2/Enc3 on the qsm
/// channel, one fusion and one decoder per branch.
template <typename T>
class DualBranchNet {
 public:
  explicit DualBranchNet(const NetworkConfig& cfg);

  // N(0, 0.01^2) weights, zero biases, unit BN scale; deterministic in seed.
  void init(std::uint64_t seed);

  // Input: [n, patch, 3] normalized (r2_prime, local_field, qsm).
  ForwardArtifacts<T> forward(const Tensor<T>& x, const PassMode& mode);
  // Accumulates parameter gradients for the last forward with mode.keep.
  void backward(const ArtifactGrads<T>& g);

  std::vector<Param<T>*> params();
  std::vector<Param<T>*> buffers();
  std::vector<Param<T>*> all_tensors();  // params then buffers, fixed order
  void zero_grad();
  const NetworkConfig& config() const noexcept { return cfg_; }

 private:
  NetworkConfig cfg_;
  Encoder<T> enc1_, enc2_, enc3_;
  Fusion<T> fuse_pos_, fuse_neg_;
  Decoder<T> dec_pos_, dec_neg_;
  TensorShape bottleneck_{};
  TensorShape out_shape_{};
};

// Copies tensor values between precisions by name (same config required).
template <typename Dst, typename Src>
void copy_params(DualBranchNet<Dst>& dst, DualBranchNet<Src>& src);

}  // namespace chisep

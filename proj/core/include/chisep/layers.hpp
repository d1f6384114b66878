#pragma once

#include <string>
#include <vector>

#include "chisep/tensor.hpp"

namespace chisep {

/// A named tensor of the model. Trainable parameters carry a gradient of the
/// same length; buffers (batch-norm running statistics) do not train.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;
  bool gaussian_init = false;  // weights: N(0, sigma^2); everything else keeps its constant init

  Param() = default;
  Param(std::string n, std::vector<int> s, T fill, bool train, bool gauss);
  std::size_t size() const noexcept { return value.size(); }
};

// How a forward pass treats batch normalization and caching.
struct PassMode {
  bool training = false;       // batch statistics instead of running statistics
  bool update_running = true;  // only meaningful when training
  bool keep = false;           // cache what backward needs
};

/// 3x3x3 convolution, stride 1, zero "same" padding, with bias.
/// Weight shape [3, 3, 3, cin, cout], kernel offsets ordered (dz, dy, dx).
template <typename T>
class Conv3 {
 public:
  Conv3() = default;
  Conv3(const std::string& name, int cin, int cout);
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(std::vector<Param<T>*>& out) { out.push_back(&weight); out.push_back(&bias); }
  int cin() const noexcept { return cin_; }
  int cout() const noexcept { return cout_; }

  Param<T> weight;
  Param<T> bias;

 private:
  int cin_ = 0;
  int cout_ = 0;
  Tensor<T> x_;
};

/// 2x2x2 transposed convolution with stride 2 (exact 2x upsampling), with
/// bias. Weight shape [2, 2, 2, cin, cout], sub-voxel offsets ordered (c, b, a).
template <typename T>
class ConvT2 {
 public:
  ConvT2() = default;
  ConvT2(const std::string& name, int cin, int cout);
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(std::vector<Param<T>*>& out) { out.push_back(&weight); out.push_back(&bias); }

  Param<T> weight;
  Param<T> bias;

 private:
  int cin_ = 0;
  int cout_ = 0;
  Tensor<T> x_;
};

/// 1x1x1 convolution. Weight shape [cin, cout].
template <typename T>
class Conv1 {
 public:
  Conv1() = default;
  Conv1(const std::string& name, int cin, int cout);
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(std::vector<Param<T>*>& out) { out.push_back(&weight); out.push_back(&bias); }

  Param<T> weight;
  Param<T> bias;

 private:
  int cin_ = 0;
  int cout_ = 0;
  Tensor<T> x_;
};

/// Per-channel batch normalization over batch and spatial axes.
template <typename T>
class BatchNorm {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels);
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(std::vector<Param<T>*>& out) { out.push_back(&gamma); out.push_back(&beta); }
  void collect_buffers(std::vector<Param<T>*>& out) {
    out.push_back(&running_mean);
    out.push_back(&running_var);
  }

  Param<T> gamma;
  Param<T> beta;
  Param<T> running_mean;
  Param<T> running_var;

 private:
  int channels_ = 0;
  bool cached_training_ = false;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

template <typename T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy) const;

 private:
  Tensor<T> y_;
};

/// 2x2x2 max pooling, stride 2. Spatial dims must be even.
template <typename T>
class MaxPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x, const PassMode& mode);
  Tensor<T> backward(const Tensor<T>& dy) const;

 private:
  TensorShape in_shape_{};
  std::vector<std::size_t> argmax_;
};

// Channel concatenation [a | b] and its adjoint.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
void split_channels(const Tensor<T>& d, int ca, Tensor<T>& da, Tensor<T>& db);

}  // namespace chisep

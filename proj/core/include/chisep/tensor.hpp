#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chisep {

/// Batch of channels-last 3D feature maps: element (n, x, y, z, c) lives at
/// ((n * nz + z) * ny + y) * nx + x) * channels + c, i.e. x fastest among the
/// spatial axes and channels innermost.
struct TensorShape {
  int n = 0;
  int nx = 0;
  int ny = 0;
  int nz = 0;
  int c = 0;

  std::size_t spatial() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * spatial() * static_cast<std::size_t>(c);
  }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::string to_string(const TensorShape& s);

template <typename T>
struct Tensor {
  TensorShape shape{};
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(TensorShape s, T fill = T(0)) : shape(s), data(s.count(), fill) {}

  std::size_t size() const noexcept { return data.size(); }
  T* sample(int n) noexcept { return data.data() + static_cast<std::size_t>(n) * shape.spatial() * shape.c; }
  const T* sample(int n) const noexcept {
    return data.data() + static_cast<std::size_t>(n) * shape.spatial() * shape.c;
  }
  void zero() noexcept { std::fill(data.begin(), data.end(), T(0)); }
};

// Throws InvalidArgument when shapes differ.
void require_shape(const TensorShape& a, const TensorShape& b, const char* what);

/// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, backed by CBLAS.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb, T beta,
          T* c, int ldc);

// Elementwise helpers used by the layers and losses.
template <typename T>
void add_inplace(std::span<T> dst, std::span<const T> src);

}  // namespace chisep

#include "chisep/layers.hpp"

#include <cmath>

#include "chisep/errors.hpp"

namespace chisep {

template <typename T>
Param<T>::Param(std::string n, std::vector<int> s, T fill, bool train, bool gauss)
    : name(std::move(n)), shape(std::move(s)), trainable(train), gaussian_init(gauss) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  value.assign(count, fill);
  if (trainable) grad.assign(count, T(0));
}

namespace {

// Zero-padded copy of one sample: (nx+2)(ny+2)(nz+2) x c.
template <typename T>
void pad_sample(const T* src, const TensorShape& s, std::vector<T>& dst) {
  const int px = s.nx + 2, py = s.ny + 2, pz = s.nz + 2;
  dst.assign(static_cast<std::size_t>(px) * py * pz * s.c, T(0));
  const std::size_t row = static_cast<std::size_t>(s.nx) * s.c;
  for (int z = 0; z < s.nz; ++z)
    for (int y = 0; y < s.ny; ++y) {
      const std::size_t in = (static_cast<std::size_t>(z) * s.ny + y) * s.nx * s.c;
      const std::size_t out = ((static_cast<std::size_t>(z + 1) * py + (y + 1)) * px + 1) * s.c;
      std::copy(src + in, src + in + row, dst.data() + out);
    }
}

struct PaddedGeometry {
  int px, py, pz;
  std::size_t p0, m;
  int offset[27];

  explicit PaddedGeometry(const TensorShape& s) : px(s.nx + 2), py(s.ny + 2), pz(s.nz + 2) {
    auto lin = [&](int i, int j, int k) {
      return static_cast<std::size_t>(i) + static_cast<std::size_t>(px) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(py) * k);
    };
    p0 = lin(1, 1, 1);
    m = lin(s.nx, s.ny, s.nz) + 1 - p0;
    int t = 0;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) offset[t++] = dx + px * (dy + py * dz);
  }
  // Row (relative to p0) of interior voxel (x, y, z).
  std::size_t row(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x + 1) + static_cast<std::size_t>(px) * (static_cast<std::size_t>(y + 1) + static_cast<std::size_t>(py) * (z + 1)) - p0;
  }
};

template <typename T>
void check_channels(const Tensor<T>& x, int c, const char* what) {
  if (x.shape.c != c) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(c) + " input channels, got " +
                          std::to_string(x.shape.c));
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv3

template <typename T>
Conv3<T>::Conv3(const std::string& name, int cin, int cout)
    : weight(name + ".weight", {3, 3, 3, cin, cout}, T(0), true, true),
      bias(name + ".bias", {cout}, T(0), true, false),
      cin_(cin),
      cout_(cout) {}

template <typename T>
Tensor<T> Conv3<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  check_channels(x, cin_, weight.name.c_str());
  const TensorShape s = x.shape;
  const PaddedGeometry g(s);
  Tensor<T> y({s.n, s.nx, s.ny, s.nz, cout_});
  std::vector<T> pin, pout(g.m * static_cast<std::size_t>(cout_));
  const std::size_t wk = static_cast<std::size_t>(cin_) * cout_;
  for (int n = 0; n < s.n; ++n) {
    pad_sample(x.sample(n), s, pin);
    std::fill(pout.begin(), pout.end(), T(0));
    for (int k = 0; k < 27; ++k) {
      gemm<T>(false, false, static_cast<int>(g.m), cout_, cin_, T(1),
              pin.data() + (g.p0 + static_cast<std::ptrdiff_t>(g.offset[k])) * cin_, cin_, weight.value.data() + k * wk,
              cout_, T(1), pout.data(), cout_);
    }
    T* out = y.sample(n);
    for (int z = 0; z < s.nz; ++z)
      for (int yy = 0; yy < s.ny; ++yy)
        for (int xx = 0; xx < s.nx; ++xx) {
          const T* src = pout.data() + g.row(xx, yy, z) * cout_;
          T* dst = out + ((static_cast<std::size_t>(z) * s.ny + yy) * s.nx + xx) * cout_;
          for (int c = 0; c < cout_; ++c) dst[c] = src[c] + bias.value[c];
        }
  }
  if (mode.keep) x_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv3<T>::backward(const Tensor<T>& dy) {
  const TensorShape s = x_.shape;
  require_shape(dy.shape, {s.n, s.nx, s.ny, s.nz, cout_}, "Conv3::backward");
  const PaddedGeometry g(s);
  Tensor<T> dx(s);
  std::vector<T> pin, dpo(g.m * static_cast<std::size_t>(cout_)), dpin;
  const std::size_t wk = static_cast<std::size_t>(cin_) * cout_;
  for (int n = 0; n < s.n; ++n) {
    pad_sample(x_.sample(n), s, pin);
    dpin.assign(pin.size(), T(0));
    std::fill(dpo.begin(), dpo.end(), T(0));
    const T* d = dy.sample(n);
    for (int z = 0; z < s.nz; ++z)
      for (int yy = 0; yy < s.ny; ++yy)
        for (int xx = 0; xx < s.nx; ++xx) {
          const T* src = d + ((static_cast<std::size_t>(z) * s.ny + yy) * s.nx + xx) * cout_;
          T* dst = dpo.data() + g.row(xx, yy, z) * cout_;
          for (int c = 0; c < cout_; ++c) {
            dst[c] = src[c];
            bias.grad[c] += src[c];
          }
        }
    for (int k = 0; k < 27; ++k) {
      const std::size_t at = (g.p0 + static_cast<std::ptrdiff_t>(g.offset[k])) * cin_;
      gemm<T>(true, false, cin_, cout_, static_cast<int>(g.m), T(1), pin.data() + at, cin_, dpo.data(), cout_, T(1),
              weight.grad.data() + k * wk, cout_);
      gemm<T>(false, true, static_cast<int>(g.m), cin_, cout_, T(1), dpo.data(), cout_, weight.value.data() + k * wk,
              cout_, T(1), dpin.data() + at, cin_);
    }
    T* out = dx.sample(n);
    const std::size_t row = static_cast<std::size_t>(s.nx) * cin_;
    for (int z = 0; z < s.nz; ++z)
      for (int yy = 0; yy < s.ny; ++yy) {
        const T* src = dpin.data() + (g.row(0, yy, z) + g.p0) * cin_;
        std::copy(src, src + row, out + (static_cast<std::size_t>(z) * s.ny + yy) * s.nx * cin_);
      }
  }
  return dx;
}

// ---------------------------------------------------------------- ConvT2

template <typename T>
ConvT2<T>::ConvT2(const std::string& name, int cin, int cout)
    : weight(name + ".weight", {2, 2, 2, cin, cout}, T(0), true, true),
      bias(name + ".bias", {cout}, T(0), true, false),
      cin_(cin),
      cout_(cout) {}

template <typename T>
Tensor<T> ConvT2<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  check_channels(x, cin_, weight.name.c_str());
  const TensorShape s = x.shape;
  const TensorShape os{s.n, 2 * s.nx, 2 * s.ny, 2 * s.nz, cout_};
  Tensor<T> y(os);
  const int vin = static_cast<int>(s.spatial());
  std::vector<T> tmp(static_cast<std::size_t>(vin) * cout_);
  const std::size_t wk = static_cast<std::size_t>(cin_) * cout_;
  for (int n = 0; n < s.n; ++n) {
    T* out = y.sample(n);
    for (int sub = 0; sub < 8; ++sub) {
      const int a = sub & 1, b = (sub >> 1) & 1, c = (sub >> 2) & 1;
      gemm<T>(false, false, vin, cout_, cin_, T(1), x.sample(n), cin_, weight.value.data() + sub * wk, cout_, T(0),
              tmp.data(), cout_);
      std::size_t v = 0;
      for (int k = 0; k < s.nz; ++k)
        for (int j = 0; j < s.ny; ++j)
          for (int i = 0; i < s.nx; ++i, ++v) {
            T* dst = out + ((static_cast<std::size_t>(2 * k + c) * os.ny + (2 * j + b)) * os.nx + (2 * i + a)) * cout_;
            const T* src = tmp.data() + v * cout_;
            for (int o = 0; o < cout_; ++o) dst[o] = src[o] + bias.value[o];
          }
    }
  }
  if (mode.keep) x_ = x;
  return y;
}

template <typename T>
Tensor<T> ConvT2<T>::backward(const Tensor<T>& dy) {
  const TensorShape s = x_.shape;
  const TensorShape os{s.n, 2 * s.nx, 2 * s.ny, 2 * s.nz, cout_};
  require_shape(dy.shape, os, "ConvT2::backward");
  Tensor<T> dx(s);
  const int vin = static_cast<int>(s.spatial());
  std::vector<T> tmp(static_cast<std::size_t>(vin) * cout_);
  const std::size_t wk = static_cast<std::size_t>(cin_) * cout_;
  for (int n = 0; n < s.n; ++n) {
    const T* d = dy.sample(n);
    for (int sub = 0; sub < 8; ++sub) {
      const int a = sub & 1, b = (sub >> 1) & 1, c = (sub >> 2) & 1;
      std::size_t v = 0;
      for (int k = 0; k < s.nz; ++k)
        for (int j = 0; j < s.ny; ++j)
          for (int i = 0; i < s.nx; ++i, ++v) {
            const T* src = d + ((static_cast<std::size_t>(2 * k + c) * os.ny + (2 * j + b)) * os.nx + (2 * i + a)) * cout_;
            T* dst = tmp.data() + v * cout_;
            for (int o = 0; o < cout_; ++o) {
              dst[o] = src[o];
              bias.grad[o] += src[o];
            }
          }
      gemm<T>(true, false, cin_, cout_, vin, T(1), x_.sample(n), cin_, tmp.data(), cout_, T(1),
              weight.grad.data() + sub * wk, cout_);
      gemm<T>(false, true, vin, cin_, cout_, T(1), tmp.data(), cout_, weight.value.data() + sub * wk, cout_, T(1),
              dx.sample(n), cin_);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Conv1

template <typename T>
Conv1<T>::Conv1(const std::string& name, int cin, int cout)
    : weight(name + ".weight", {cin, cout}, T(0), true, true),
      bias(name + ".bias", {cout}, T(0), true, false),
      cin_(cin),
      cout_(cout) {}

template <typename T>
Tensor<T> Conv1<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  check_channels(x, cin_, weight.name.c_str());
  TensorShape os = x.shape;
  os.c = cout_;
  Tensor<T> y(os);
  const int rows = static_cast<int>(x.shape.spatial()) * x.shape.n;
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < cout_; ++o) y.data[static_cast<std::size_t>(r) * cout_ + o] = bias.value[o];
  gemm<T>(false, false, rows, cout_, cin_, T(1), x.data.data(), cin_, weight.value.data(), cout_, T(1), y.data.data(),
          cout_);
  if (mode.keep) x_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv1<T>::backward(const Tensor<T>& dy) {
  TensorShape os = x_.shape;
  os.c = cout_;
  require_shape(dy.shape, os, "Conv1::backward");
  const int rows = static_cast<int>(x_.shape.spatial()) * x_.shape.n;
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < cout_; ++o) bias.grad[o] += dy.data[static_cast<std::size_t>(r) * cout_ + o];
  gemm<T>(true, false, cin_, cout_, rows, T(1), x_.data.data(), cin_, dy.data.data(), cout_, T(1), weight.grad.data(),
          cout_);
  Tensor<T> dx(x_.shape);
  gemm<T>(false, true, rows, cin_, cout_, T(1), dy.data.data(), cout_, weight.value.data(), cout_, T(0), dx.data.data(),
          cin_);
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, int channels)
    : gamma(name + ".gamma", {channels}, T(1), true, false),
      beta(name + ".beta", {channels}, T(0), true, false),
      running_mean(name + ".running_mean", {channels}, T(0), false, false),
      running_var(name + ".running_var", {channels}, T(1), false, false),
      channels_(channels) {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  check_channels(x, channels_, gamma.name.c_str());
  const std::size_t rows = x.shape.spatial() * static_cast<std::size_t>(x.shape.n);
  const int C = channels_;
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  if (mode.training) {
    for (std::size_t r = 0; r < rows; ++r)
      for (int c = 0; c < C; ++c) mean[c] += x.data[r * C + c];
    for (int c = 0; c < C; ++c) mean[c] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (int c = 0; c < C; ++c) {
        const double d = x.data[r * C + c] - mean[c];
        var[c] += d * d;
      }
    for (int c = 0; c < C; ++c) var[c] /= static_cast<double>(rows);
    if (mode.update_running) {
      const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
      for (int c = 0; c < C; ++c) {
        running_mean.value[c] = static_cast<T>((1.0 - kMomentum) * running_mean.value[c] + kMomentum * mean[c]);
        running_var.value[c] = static_cast<T>((1.0 - kMomentum) * running_var.value[c] + kMomentum * var[c] * unbias);
      }
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = running_mean.value[c];
      var[c] = running_var.value[c];
    }
  }
  std::vector<double> inv(C);
  for (int c = 0; c < C; ++c) inv[c] = 1.0 / std::sqrt(var[c] + kEps);

  Tensor<T> y(x.shape);
  Tensor<T> xhat;
  if (mode.keep) xhat = Tensor<T>(x.shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      const T h = static_cast<T>((x.data[i] - mean[c]) * inv[c]);
      if (mode.keep) xhat.data[i] = h;
      y.data[i] = gamma.value[c] * h + beta.value[c];
    }
  if (mode.keep) {
    xhat_ = std::move(xhat);
    inv_std_ = std::move(inv);
    cached_training_ = mode.training;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy) {
  require_shape(dy.shape, xhat_.shape, "BatchNorm::backward");
  const std::size_t rows = dy.shape.spatial() * static_cast<std::size_t>(dy.shape.n);
  const int C = channels_;
  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      sum_dy[c] += dy.data[i];
      sum_dy_xhat[c] += static_cast<double>(dy.data[i]) * xhat_.data[i];
    }
  for (int c = 0; c < C; ++c) {
    gamma.grad[c] += static_cast<T>(sum_dy_xhat[c]);
    beta.grad[c] += static_cast<T>(sum_dy[c]);
  }
  Tensor<T> dx(dy.shape);
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      const double g = static_cast<double>(gamma.value[c]) * inv_std_[c];
      if (cached_training_) {
        dx.data[i] = static_cast<T>(g * (dy.data[i] - sum_dy[c] / m - xhat_.data[i] * sum_dy_xhat[c] / m));
      } else {
        dx.data[i] = static_cast<T>(g * dy.data[i]);
      }
    }
  return dx;
}

// ---------------------------------------------------------------- ReLU / pool / concat

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  if (mode.keep) y_ = y;
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& dy) const {
  require_shape(dy.shape, y_.shape, "ReLU::backward");
  Tensor<T> dx(dy.shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] = y_.data[i] > T(0) ? dy.data[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x, const PassMode& mode) {
  const TensorShape s = x.shape;
  if (s.nx % 2 || s.ny % 2 || s.nz % 2) throw InvalidArgument("MaxPool2: spatial dims must be even, got " + to_string(s));
  const TensorShape os{s.n, s.nx / 2, s.ny / 2, s.nz / 2, s.c};
  Tensor<T> y(os);
  if (mode.keep) argmax_.assign(os.count(), 0);
  std::size_t out = 0;
  for (int n = 0; n < s.n; ++n)
    for (int k = 0; k < os.nz; ++k)
      for (int j = 0; j < os.ny; ++j)
        for (int i = 0; i < os.nx; ++i)
          for (int c = 0; c < s.c; ++c, ++out) {
            std::size_t best = 0;
            T bv = T(0);
            bool first = true;
            for (int dz = 0; dz < 2; ++dz)
              for (int dyy = 0; dyy < 2; ++dyy)
                for (int dxx = 0; dxx < 2; ++dxx) {
                  const std::size_t idx =
                      ((((static_cast<std::size_t>(n) * s.nz + 2 * k + dz) * s.ny + 2 * j + dyy) * s.nx + 2 * i + dxx) *
                       s.c) + c;
                  if (first || x.data[idx] > bv) {
                    bv = x.data[idx];
                    best = idx;
                    first = false;
                  }
                }
            y.data[out] = bv;
            if (mode.keep) argmax_[out] = best;
          }
  if (mode.keep) in_shape_ = s;
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) const {
  if (dy.size() != argmax_.size()) throw InvalidArgument("MaxPool2::backward: shape mismatch");
  Tensor<T> dx(in_shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  TensorShape sa = a.shape, sb = b.shape;
  sb.c = sa.c;
  require_shape(sa, sb, "concat_channels");
  TensorShape os = a.shape;
  os.c = a.shape.c + b.shape.c;
  Tensor<T> y(os);
  const std::size_t rows = a.shape.spatial() * static_cast<std::size_t>(a.shape.n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data.data() + r * a.shape.c, a.shape.c, y.data.data() + r * os.c);
    std::copy_n(b.data.data() + r * b.shape.c, b.shape.c, y.data.data() + r * os.c + a.shape.c);
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& d, int ca, Tensor<T>& da, Tensor<T>& db) {
  TensorShape sa = d.shape, sb = d.shape;
  sa.c = ca;
  sb.c = d.shape.c - ca;
  da = Tensor<T>(sa);
  db = Tensor<T>(sb);
  const std::size_t rows = d.shape.spatial() * static_cast<std::size_t>(d.shape.n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(d.data.data() + r * d.shape.c, sa.c, da.data.data() + r * sa.c);
    std::copy_n(d.data.data() + r * d.shape.c + sa.c, sb.c, db.data.data() + r * sb.c);
  }
}

#define CHISEP_INSTANTIATE(T)                                                        \
  template struct Param<T>;                                                          \
  template class Conv3<T>;                                                           \
  template class ConvT2<T>;                                                          \
  template class Conv1<T>;                                                           \
  template class BatchNorm<T>;                                                       \
  template class ReLU<T>;                                                            \
  template class MaxPool2<T>;                                                        \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);         \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);

CHISEP_INSTANTIATE(float)
CHISEP_INSTANTIATE(double)

#undef CHISEP_INSTANTIATE

}  // namespace chisep

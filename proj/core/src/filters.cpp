#include "chisep/filters.hpp"

#include <algorithm>
#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/fft.hpp"

namespace chisep {

std::vector<double> gaussian_taps(double sigma, int radius) {
  if (!(sigma > 0.0) || radius < 0) throw InvalidArgument("gaussian_taps: sigma must be > 0, radius >= 0");
  std::vector<double> t(2 * static_cast<std::size_t>(radius) + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    t[static_cast<std::size_t>(i + radius)] = v;
    s += v;
  }
  for (auto& v : t) v /= s;
  return t;
}

Volume3D gaussian_smooth(const Volume3D& v, double sigma, int radius) {
  if (radius < 0) radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto taps = gaussian_taps(sigma, radius);
  const Dims d = v.dims();
  std::vector<double> cur(v.data().begin(), v.data().end()), next(cur.size());
  const std::size_t stride[3] = {1, static_cast<std::size_t>(d.nx), static_cast<std::size_t>(d.nx) * d.ny};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    for (int k = 0; k < d.nz; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const int pos = axis == 0 ? i : (axis == 1 ? j : k);
          const std::size_t idx = linear_index(d, i, j, k);
          const std::size_t line0 = idx - static_cast<std::size_t>(pos) * stride[axis];
          double acc = 0.0;
          for (int t = -radius; t <= radius; ++t) {
            const int q = std::clamp(pos + t, 0, n - 1);
            acc += taps[static_cast<std::size_t>(t + radius)] * cur[line0 + static_cast<std::size_t>(q) * stride[axis]];
          }
          next[idx] = acc;
        }
    std::swap(cur, next);
  }
  return Volume3D(d, v.voxel_size(), std::move(cur), v.units());
}

std::vector<double> log_kernel(double sigma, int size) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("log_kernel: size must be odd and positive");
  if (!(sigma > 0.0)) throw InvalidArgument("log_kernel: sigma must be > 0");
  const int r = size / 2;
  const std::size_t n = static_cast<std::size_t>(size) * size * size;
  std::vector<double> g(n), r2(n);
  double gsum = 0.0;
  std::size_t idx = 0;
  for (int z = -r; z <= r; ++z)
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x, ++idx) {
        r2[idx] = static_cast<double>(x * x + y * y + z * z);
        g[idx] = std::exp(-r2[idx] / (2.0 * sigma * sigma));
        gsum += g[idx];
      }
  const double s4 = sigma * sigma * sigma * sigma;
  double hsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = (g[i] / gsum) * (r2[i] - 3.0 * sigma * sigma) / s4;
    hsum += g[i];
  }
  const double mean = hsum / static_cast<double>(n);
  for (auto& v : g) v -= mean;
  return g;
}

Volume3D convolve_periodic(const Volume3D& v, const std::vector<double>& kernel, int size) {
  const std::size_t n = static_cast<std::size_t>(size) * size * size;
  if (kernel.size() != n) throw InvalidArgument("convolve_periodic: kernel length mismatch");
  const Dims d = v.dims();
  const int r = size / 2;
  ComplexVolume k(d);
  std::size_t idx = 0;
  auto wrap = [](int a, int m) { return ((a % m) + m) % m; };
  for (int z = -r; z <= r; ++z)
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x, ++idx) {
        k.data[linear_index(d, wrap(x, d.nx), wrap(y, d.ny), wrap(z, d.nz))] += kernel[idx];
      }
  const ComplexVolume kf = fft3(k);
  std::vector<double> real(kf.data.size());
  // A symmetric kernel has a real spectrum; keep the full complex product anyway.
  ComplexVolume xf = fft3(ComplexVolume::from_real(v));
  for (std::size_t i = 0; i < xf.data.size(); ++i) xf.data[i] *= kf.data[i];
  const ComplexVolume y = ifft3(xf);
  for (std::size_t i = 0; i < real.size(); ++i) real[i] = y.data[i].real();
  return Volume3D(d, v.voxel_size(), std::move(real), v.units());
}

}  // namespace chisep

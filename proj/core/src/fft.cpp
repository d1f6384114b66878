#include "chisep/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "chisep/errors.hpp"

namespace chisep {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (dims, direction) under a lock and
// never destroyed.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Dims& d, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(d.nx, d.ny, d.nz, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<Complex> a(d.count()), b(d.count());
    // Row-major with x fastest means FFTW's n0 is nz.
    fftw_plan p = fftw_plan_dft_3d(d.nz, d.ny, d.nx, reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw NumericError("FFTW failed to create plan for " + to_string(d));
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

void run(Dims dims, std::span<const Complex> in, std::span<Complex> out, int sign) {
  validate_grid(dims, VoxelSize{});
  if (in.size() != dims.count() || out.size() != dims.count()) {
    throw InvalidArgument("fft3: buffer size does not match dims " + to_string(dims));
  }
  if (in.data() == out.data()) throw InvalidArgument("fft3: in-place transform not supported");
  fftw_plan p = PlanCache::instance().get(dims, sign);
  // fftw_execute_dft does not write to the input of an out-of-place c2c plan.
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

ComplexVolume ComplexVolume::from_real(const Volume3D& v) {
  ComplexVolume c(v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) c.data[i] = Complex(v[i], 0.0);
  return c;
}

void fft3(Dims dims, std::span<const Complex> in, std::span<Complex> out) { run(dims, in, out, FFTW_FORWARD); }

void ifft3(Dims dims, std::span<const Complex> in, std::span<Complex> out) {
  run(dims, in, out, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(dims.count());
  for (auto& v : out) v *= scale;
}

ComplexVolume fft3(const ComplexVolume& x) {
  ComplexVolume out(x.dims);
  fft3(x.dims, x.data, out.data);
  return out;
}

ComplexVolume ifft3(const ComplexVolume& spectrum) {
  ComplexVolume out(spectrum.dims);
  ifft3(spectrum.dims, spectrum.data, out.data);
  return out;
}

std::vector<double> apply_spectral_kernel(Dims dims, std::span<const double> x, std::span<const double> kernel) {
  if (x.size() != dims.count() || kernel.size() != dims.count()) {
    throw InvalidArgument("apply_spectral_kernel: size mismatch for dims " + to_string(dims));
  }
  std::vector<Complex> a(dims.count()), b(dims.count());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = Complex(x[i], 0.0);
  fft3(dims, a, b);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] *= kernel[i];
  ifft3(dims, b, a);
  std::vector<double> out(dims.count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i].real();
  return out;
}

Volume3D apply_spectral_kernel(const Volume3D& x, std::span<const double> kernel) {
  return Volume3D(x.dims(), x.voxel_size(), apply_spectral_kernel(x.dims(), x.data(), kernel), x.units());
}

}  // namespace chisep

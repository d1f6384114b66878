#include "chisep/inference.hpp"

#include "chisep/errors.hpp"

namespace chisep {

template <typename T>
Tensor<T> normalized_patch(const AcquisitionSet& acq, const NormStats& norm, const Index3& origin, const Dims& size) {
  const Dims d = acq.dims();
  Tensor<T> x({1, size.nx, size.ny, size.nz, 3});
  const std::array<const Volume3D*, 3> ch{&acq.r2_prime, &acq.local_field, &acq.qsm};
  std::size_t v = 0;
  for (int k = 0; k < size.nz; ++k)
    for (int j = 0; j < size.ny; ++j)
      for (int i = 0; i < size.nx; ++i, ++v) {
        const std::size_t src = linear_index(d, origin[0] + i, origin[1] + j, origin[2] + k);
        for (int c = 0; c < 3; ++c) x.data[3 * v + c] = static_cast<T>(norm.normalize(c, (*ch[c])[src]));
      }
  return x;
}

template <typename T>
SourcePair infer_volume(DualBranchNet<T>& net, const AcquisitionSet& acq, const std::optional<NormStats>& norm,
                        const InferenceOptions& opts) {
  if (!norm) throw InvalidArgument("infer_volume: normalization statistics are required");
  norm->validate();
  acq.validate();
  const Dims d = acq.dims();
  const Dims w = opts.window;
  Index3 stride = opts.stride;
  for (int a = 0; a < 3; ++a) {
    if (w[a] < 8 || w[a] % 8 != 0) throw InvalidArgument("inference window must be a multiple of 8, got " + to_string(w));
    if (w[a] > d[a]) throw InvalidArgument("inference window " + to_string(w) + " exceeds volume " + to_string(d));
    if (stride[a] == 0) stride[a] = std::max(1, w[a] / 2);
    if (stride[a] < 1) throw InvalidArgument("inference stride must be >= 1");
  }

  std::vector<double> sum_p(d.count(), 0.0), sum_n(d.count(), 0.0), hits(d.count(), 0.0);
  const PassMode eval{false, false, false};
  for (const Index3& o : crop_patches(d, w, stride)) {
    const Tensor<T> x = normalized_patch<T>(acq, *norm, o, w);
    const ForwardArtifacts<T> art = net.forward(x, eval);
    std::size_t v = 0;
    for (int k = 0; k < w.nz; ++k)
      for (int j = 0; j < w.ny; ++j)
        for (int i = 0; i < w.nx; ++i, ++v) {
          const std::size_t dst = linear_index(d, o[0] + i, o[1] + j, o[2] + k);
          sum_p[dst] += art.chi_pos.data[v];
          sum_n[dst] += art.chi_neg.data[v];
          hits[dst] += 1.0;
        }
  }

  const VoxelSize vs = acq.qsm.voxel_size();
  std::vector<double> p(d.count()), n(d.count());
  for (std::size_t i = 0; i < d.count(); ++i) {
    if (!acq.mask[i]) continue;
    p[i] = sum_p[i] / hits[i];
    n[i] = sum_n[i] / hits[i];
    if (opts.clamp) {
      p[i] = std::max(p[i], 0.0);
      n[i] = std::min(n[i], 0.0);
    }
  }
  return SourcePair{Volume3D(d, vs, std::move(p), "ppm"), Volume3D(d, vs, std::move(n), "ppm")};
}

template SourcePair infer_volume<float>(DualBranchNet<float>&, const AcquisitionSet&, const std::optional<NormStats>&,
                                        const InferenceOptions&);
template SourcePair infer_volume<double>(DualBranchNet<double>&, const AcquisitionSet&,
                                         const std::optional<NormStats>&, const InferenceOptions&);
template Tensor<float> normalized_patch<float>(const AcquisitionSet&, const NormStats&, const Index3&, const Dims&);
template Tensor<double> normalized_patch<double>(const AcquisitionSet&, const NormStats&, const Index3&, const Dims&);

}  // namespace chisep

#include "chisep/metrics.hpp"

#include <cmath>

#include "chisep/errors.hpp"
#include "chisep/filters.hpp"

namespace chisep {
namespace {

void check_inputs(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const char* what) {
  require_same_grid(est, ref, what);
  if (!(mask.dims() == ref.dims())) throw InvalidArgument(std::string(what) + ": mask grid differs");
}

double masked_nrmse(std::span<const double> est, std::span<const double> ref, const MaskVolume& mask,
                    const char* what) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!mask[i]) continue;
    const double d = est[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw UndefinedMetric(std::string(what) + ": reference has zero energy within the mask");
  return 100.0 * std::sqrt(num / den);
}

}  // namespace

double nrmse(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask) {
  check_inputs(est, ref, mask, "nrmse");
  return masked_nrmse(est.data(), ref.data(), mask, "nrmse");
}

double hfen(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const HfenParams& params) {
  check_inputs(est, ref, mask, "hfen");
  const std::vector<double> k = log_kernel(params.sigma, params.size);
  const Volume3D le = convolve_periodic(est, k, params.size);
  const Volume3D lr = convolve_periodic(ref, k, params.size);
  return masked_nrmse(le.data(), lr.data(), mask, "hfen");
}

double xsim(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const XsimParams& params) {
  check_inputs(est, ref, mask, "xsim");
  if (mask.count() == 0) throw InvalidArgument("xsim: mask is empty");
  const std::size_t n = ref.size();
  Volume3D xx(ref.dims(), ref.voxel_size()), yy(ref.dims(), ref.voxel_size()), xy(ref.dims(), ref.voxel_size());
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = est[i] * est[i];
    yy[i] = ref[i] * ref[i];
    xy[i] = est[i] * ref[i];
  }
  auto blur = [&](const Volume3D& v) { return gaussian_smooth(v, params.sigma, params.radius); };
  const Volume3D mx = blur(est), my = blur(ref), sxx = blur(xx), syy = blur(yy), sxy = blur(xy);
  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double ux = mx[i], uy = my[i];
    const double vx = sxx[i] - ux * ux, vy = syy[i] - uy * uy, cxy = sxy[i] - ux * uy;
    sum += (2.0 * ux * uy + c1) * (2.0 * cxy + c2) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    ++count;
  }
  return sum / static_cast<double>(count);
}

RoiStats roi_stats(const Volume3D& vol, const MaskVolume& roi) {
  if (!(roi.dims() == vol.dims())) throw InvalidArgument("roi_stats: ROI grid differs from volume");
  RoiStats s;
  double sum = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (!roi[i]) continue;
    sum += vol[i];
    ++s.n;
  }
  if (s.n == 0) throw InvalidArgument("roi_stats: ROI is empty");
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (!roi[i]) continue;
    const double d = vol[i] - s.mean;
    ss += d * d;
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n));
  return s;
}

RegressionResult linear_regression(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("linear_regression: xs and ys differ in length");
  if (xs.size() < 2) throw InvalidArgument("linear_regression: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InvalidArgument("linear_regression: xs are all equal");
  RegressionResult r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  if (syy == 0.0) {
    r.r_squared = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = ys[i] - (r.slope * xs[i] + r.intercept);
      ss_res += e * e;
    }
    r.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return r;
}

double trilinear(const Volume3D& vol, const std::array<double, 3>& p) {
  const Dims d = vol.dims();
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= 0.0 && p[a] <= d[a] - 1)) throw InvalidArgument("trilinear: point outside the grid");
    i0[a] = std::min(static_cast<int>(std::floor(p[a])), std::max(d[a] - 2, 0));
    f[a] = p[a] - i0[a];
  }
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
    if (w == 0.0) continue;
    v += w * vol.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
  }
  return v;
}

std::vector<ProfileSample> line_profile(const Volume3D& vol, const std::array<double, 3>& p0,
                                        const std::array<double, 3>& p1, int n) {
  if (n < 2) throw InvalidArgument("line_profile: need at least 2 samples");
  const Dims d = vol.dims();
  for (const auto& p : {p0, p1})
    for (int a = 0; a < 3; ++a)
      if (!(p[a] >= 0.0 && p[a] <= d[a] - 1)) throw InvalidArgument("line_profile: endpoint outside the grid");
  const VoxelSize vs = vol.voxel_size();
  double len = 0.0;
  for (int a = 0; a < 3; ++a) len += std::pow((p1[a] - p0[a]) * vs[a], 2);
  len = std::sqrt(len);
  std::vector<ProfileSample> out;
  out.reserve(n);
  for (int s = 0; s < n; ++s) {
    const double t = static_cast<double>(s) / (n - 1);
    std::array<double, 3> p{};
    for (int a = 0; a < 3; ++a) p[a] = p0[a] + t * (p1[a] - p0[a]);
    out.push_back({t * len, trilinear(vol, p)});
  }
  return out;
}

}  // namespace chisep

#include "chisep/losses.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/fft.hpp"

namespace chisep {

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma, delta}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("loss weights must be finite and >= 0");
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"delta", delta}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  for (const auto& [key, value] : j.items()) {
    if (key == "alpha") w.alpha = value.get<double>();
    else if (key == "beta") w.beta = value.get<double>();
    else if (key == "gamma") w.gamma = value.get<double>();
    else if (key == "delta") w.delta = value.get<double>();
    else throw InvalidArgument("unknown loss weight '" + key + "'");
  }
  w.validate();
  return w;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  contrast += o.contrast;
  l2 += o.l2;
  model += o.model;
  gradient += o.gradient;
  total += o.total;
  return *this;
}

LossBreakdown& LossBreakdown::operator/=(double s) {
  contrast /= s;
  l2 /= s;
  model /= s;
  gradient /= s;
  total /= s;
  return *this;
}

bool LossBreakdown::all_finite() const noexcept {
  return std::isfinite(contrast) && std::isfinite(l2) && std::isfinite(model) && std::isfinite(gradient) &&
         std::isfinite(total);
}

nlohmann::json LossBreakdown::to_json() const {
  return {{"contrast", contrast}, {"l2", l2}, {"model", model}, {"gradient", gradient}, {"total", total}};
}

LossBreakdown LossBreakdown::from_json(const nlohmann::json& j) {
  return {j.at("contrast").get<double>(), j.at("l2").get<double>(), j.at("model").get<double>(),
          j.at("gradient").get<double>(), j.at("total").get<double>()};
}

Norm parse_norm(const std::string& s) {
  if (s == "l1") return Norm::kL1;
  if (s == "l2") return Norm::kL2;
  throw InvalidArgument("norm must be 'l1' or 'l2', got '" + s + "'");
}

const char* to_string(Norm n) { return n == Norm::kL1 ? "l1" : "l2"; }

namespace {

double rho(double r, Norm norm) noexcept { return norm == Norm::kL1 ? std::abs(r) : r * r; }

double rho_prime(double r, Norm norm) noexcept {
  if (norm == Norm::kL2) return 2.0 * r;
  return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

double sgn(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double softplus(double a) noexcept { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

double sigmoid(double a) noexcept { return 1.0 / (1.0 + std::exp(-a)); }

void require_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
}

template <typename T>
std::vector<double> to_double(const T* p, std::size_t n) {
  return std::vector<double>(p, p + n);
}

}  // namespace

double cosine_similarity(std::span<const double> x, std::span<const double> y, std::span<double> dx,
                         std::span<double> dy, bool* degenerate) {
  require_size(x.size(), y.size(), "cosine_similarity");
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) {
    if (degenerate) *degenerate = true;
    std::fill(dx.begin(), dx.end(), 0.0);
    std::fill(dy.begin(), dy.end(), 0.0);
    return 0.0;
  }
  const double nx = std::sqrt(xx), ny = std::sqrt(yy);
  const double s = xy / (nx * ny);
  if (!dx.empty()) {
    require_size(dx.size(), x.size(), "cosine_similarity gradient");
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = y[i] / (nx * ny) - s * x[i] / xx;
  }
  if (!dy.empty()) {
    require_size(dy.size(), y.size(), "cosine_similarity gradient");
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = x[i] / (nx * ny) - s * y[i] / yy;
  }
  return s;
}

template <typename T>
double batch_cosine(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* dx, Tensor<T>* dy, bool* degenerate) {
  require_shape(x.shape, y.shape, "batch_cosine");
  const int batch = x.shape.n;
  const std::size_t per = x.shape.spatial() * static_cast<std::size_t>(x.shape.c);
  if (dx) *dx = Tensor<T>(x.shape);
  if (dy) *dy = Tensor<T>(y.shape);
  std::vector<double> gx(dx ? per : 0), gy(dy ? per : 0);
  double sum = 0.0;
  for (int n = 0; n < batch; ++n) {
    const auto xs = to_double(x.sample(n), per);
    const auto ys = to_double(y.sample(n), per);
    sum += cosine_similarity(xs, ys, gx, gy, degenerate);
    for (std::size_t i = 0; i < gx.size(); ++i) dx->sample(n)[i] = static_cast<T>(gx[i] / batch);
    for (std::size_t i = 0; i < gy.size(); ++i) dy->sample(n)[i] = static_cast<T>(gy[i] / batch);
  }
  return sum / batch;
}

double contrastive_from_similarities(double s_pp, double s_pn, double s_np, double s_nn) {
  return softplus(s_pn - s_pp) + softplus(s_np - s_nn);
}

template <typename T>
double contrastive_loss(const Tensor<T>& gp, const Tensor<T>& gn, const Tensor<T>& fp, const Tensor<T>& fn,
                        ArtifactGrads<T>* grads) {
  require_shape(gp.shape, gn.shape, "contrastive_loss");
  require_shape(gp.shape, fp.shape, "contrastive_loss");
  require_shape(gp.shape, fn.shape, "contrastive_loss");
  const bool g = grads != nullptr;
  Tensor<T> gp_pp, fp_pp, gp_pn, fn_pn, gn_np, fp_np, gn_nn, fn_nn;
  const double s_pp = batch_cosine(gp, fp, g ? &gp_pp : nullptr, g ? &fp_pp : nullptr);
  const double s_pn = batch_cosine(gp, fn, g ? &gp_pn : nullptr, g ? &fn_pn : nullptr);
  const double s_np = batch_cosine(gn, fp, g ? &gn_np : nullptr, g ? &fp_np : nullptr);
  const double s_nn = batch_cosine(gn, fn, g ? &gn_nn : nullptr, g ? &fn_nn : nullptr);
  if (g) {
    const T wa = static_cast<T>(sigmoid(s_pn - s_pp));
    const T wb = static_cast<T>(sigmoid(s_np - s_nn));
    grads->guide_pos = Tensor<T>(gp.shape);
    grads->guide_neg = Tensor<T>(gp.shape);
    grads->f_pos = Tensor<T>(gp.shape);
    grads->f_neg = Tensor<T>(gp.shape);
    for (std::size_t i = 0; i < gp.size(); ++i) {
      grads->guide_pos.data[i] = wa * (gp_pn.data[i] - gp_pp.data[i]);
      grads->guide_neg.data[i] = wb * (gn_np.data[i] - gn_nn.data[i]);
      grads->f_pos.data[i] = wb * fp_np.data[i] - wa * fp_pp.data[i];
      grads->f_neg.data[i] = wa * fn_pn.data[i] - wb * fn_nn.data[i];
    }
  }
  return contrastive_from_similarities(s_pp, s_pn, s_np, s_nn);
}

double l2_loss(std::span<const double> p, std::span<const double> n, std::span<const double> gp,
               std::span<const double> gn, std::span<double> dp, std::span<double> dn) {
  require_size(p.size(), gp.size(), "l2_loss");
  require_size(n.size(), gn.size(), "l2_loss");
  require_size(p.size(), n.size(), "l2_loss");
  if (p.empty()) throw InvalidArgument("l2_loss: empty input");
  const double inv = 1.0 / static_cast<double>(p.size());
  double sp = 0.0, sn = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double rp = p[i] - gp[i], rn = n[i] - gn[i];
    sp += rp * rp;
    sn += rn * rn;
    if (!dp.empty()) dp[i] = 2.0 * rp * inv;
    if (!dn.empty()) dn[i] = 2.0 * rn * inv;
  }
  return (sp + sn) * inv;
}

double model_loss(std::span<const double> p, std::span<const double> n, const AcquisitionSet& acq,
                  const DipoleKernel& kernel, Norm norm, bool use_mask, std::span<double> dp, std::span<double> dn) {
  const Dims dims = acq.dims();
  const std::size_t count = dims.count();
  require_size(p.size(), count, "model_loss");
  require_size(n.size(), count, "model_loss");
  if (!(kernel.dims == dims)) throw InvalidArgument("model_loss: dipole kernel grid differs from acquisition grid");

  std::vector<double> net(count), w(count, 1.0);
  for (std::size_t i = 0; i < count; ++i) net[i] = p[i] + n[i];
  double denom = static_cast<double>(count);
  if (use_mask) {
    denom = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      w[i] = acq.mask.data()[i] ? 1.0 : 0.0;
      denom += w[i];
    }
    if (denom == 0.0) {
      std::fill(dp.begin(), dp.end(), 0.0);
      std::fill(dn.begin(), dn.end(), 0.0);
      return 0.0;
    }
  }
  const std::vector<double> field = apply_spectral_kernel(dims, net, kernel.values);
  const bool grad = !dp.empty() || !dn.empty();
  std::vector<double> g_field(grad ? count : 0);
  double l_qsm = 0.0, l_field = 0.0, l_r2p = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r1 = net[i] - acq.qsm[i];
    const double r2 = field[i] - acq.local_field[i];
    const double r3 = acq.a_map[i] * (p[i] - n[i]) - acq.r2_prime[i];
    l_qsm += w[i] * rho(r1, norm);
    l_field += w[i] * rho(r2, norm);
    l_r2p += w[i] * rho(r3, norm);
    if (grad) {
      const double g1 = w[i] * rho_prime(r1, norm) / denom;
      const double g3 = w[i] * acq.a_map[i] * rho_prime(r3, norm) / denom;
      g_field[i] = w[i] * rho_prime(r2, norm) / denom;
      if (!dp.empty()) dp[i] = g1 + g3;
      if (!dn.empty()) dn[i] = g1 - g3;
    }
  }
  if (grad) {
    // The real, even dipole kernel makes the convolution self-adjoint.
    const std::vector<double> back = apply_spectral_kernel(dims, g_field, kernel.values);
    for (std::size_t i = 0; i < count; ++i) {
      if (!dp.empty()) dp[i] += back[i];
      if (!dn.empty()) dn[i] += back[i];
    }
  }
  return (l_qsm + l_field + l_r2p) / denom;
}

double gradient_loss(const Dims& dims, std::span<const double> u, std::span<const double> g, Norm norm,
                     const MaskVolume* mask, std::span<double> du) {
  require_size(u.size(), dims.count(), "gradient_loss");
  require_size(g.size(), dims.count(), "gradient_loss");
  if (mask && !(mask->dims() == dims)) throw InvalidArgument("gradient_loss: mask grid differs");
  if (!du.empty()) {
    require_size(du.size(), dims.count(), "gradient_loss gradient");
    std::fill(du.begin(), du.end(), 0.0);
  }
  const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dims.nx),
                                          static_cast<std::size_t>(dims.nx) * dims.ny};
  double total = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (dims[axis] < 2) continue;
    const std::size_t st = stride[axis];
    // First pass: pair count (the mean's denominator).
    std::size_t pairs = 0;
    for (int k = 0; k < dims.nz; ++k)
      for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i) {
          const Index3 v{i, j, k};
          if (v[axis] + 1 >= dims[axis]) continue;
          const std::size_t a = linear_index(dims, i, j, k);
          if (mask && !(mask->data()[a] && mask->data()[a + st])) continue;
          ++pairs;
        }
    if (pairs == 0) continue;
    const double inv = 1.0 / static_cast<double>(pairs);
    double sum = 0.0;
    for (int k = 0; k < dims.nz; ++k)
      for (int j = 0; j < dims.ny; ++j)
        for (int i = 0; i < dims.nx; ++i) {
          const Index3 v{i, j, k};
          if (v[axis] + 1 >= dims[axis]) continue;
          const std::size_t a = linear_index(dims, i, j, k);
          if (mask && !(mask->data()[a] && mask->data()[a + st])) continue;
          const double du_a = u[a + st] - u[a];
          const double dg_a = g[a + st] - g[a];
          const double r = std::abs(du_a) - std::abs(dg_a);
          sum += rho(r, norm);
          if (!du.empty()) {
            const double c = rho_prime(r, norm) * sgn(du_a) * inv;
            du[a + st] += c;
            du[a] -= c;
          }
        }
    total += sum * inv;
  }
  return total;
}

template <typename T>
LossBreakdown composite_loss(const ForwardArtifacts<T>& art, std::span<const PhysicalTarget* const> targets,
                             const DipoleKernel& kernel, const LossOptions& opts, ArtifactGrads<T>* grads) {
  opts.weights.validate();
  const TensorShape os = art.chi_pos.shape;
  require_shape(os, art.chi_neg.shape, "composite_loss");
  if (os.c != 1) throw InvalidArgument("composite_loss: outputs must have one channel");
  if (targets.size() != static_cast<std::size_t>(os.n)) {
    throw InvalidArgument("composite_loss: " + std::to_string(targets.size()) + " targets for batch of " +
                          std::to_string(os.n));
  }
  const LossWeights& w = opts.weights;
  const int batch = os.n;
  const std::size_t vox = os.spatial();
  const bool g = grads != nullptr;

  LossBreakdown out;
  ArtifactGrads<T> cg;
  out.contrast = contrastive_loss(art.guide_pos, art.guide_neg, art.f_pos, art.f_neg, g && w.alpha > 0 ? &cg : nullptr);
  if (g) {
    *grads = ArtifactGrads<T>{};
    grads->chi_pos = Tensor<T>(os);
    grads->chi_neg = Tensor<T>(os);
    if (w.alpha > 0) {
      for (auto* t : {&cg.guide_pos, &cg.guide_neg, &cg.f_pos, &cg.f_neg})
        for (auto& v : t->data) v = static_cast<T>(v * w.alpha);
      grads->guide_pos = std::move(cg.guide_pos);
      grads->guide_neg = std::move(cg.guide_neg);
      grads->f_pos = std::move(cg.f_pos);
      grads->f_neg = std::move(cg.f_neg);
    }
  }

  std::vector<double> dp(g ? vox : 0), dn(g ? vox : 0), acc_p(g ? vox : 0), acc_n(g ? vox : 0);
  for (int b = 0; b < batch; ++b) {
    const PhysicalTarget& t = *targets[b];
    if (!(t.acq.dims().count() == vox) || !(t.acq.dims() == Dims{os.nx, os.ny, os.nz})) {
      throw InvalidArgument("composite_loss: target grid " + to_string(t.acq.dims()) + " differs from output " +
                            to_string(os));
    }
    const auto p = to_double(art.chi_pos.sample(b), vox);
    const auto n = to_double(art.chi_neg.sample(b), vox);
    std::fill(acc_p.begin(), acc_p.end(), 0.0);
    std::fill(acc_n.begin(), acc_n.end(), 0.0);
    auto accumulate = [&](double weight, const std::vector<double>& a, const std::vector<double>& c) {
      for (std::size_t i = 0; i < acc_p.size(); ++i) {
        acc_p[i] += weight * a[i];
        acc_n[i] += weight * c[i];
      }
    };

    const MaskVolume* mask = opts.use_mask ? &t.acq.mask : nullptr;
    if (opts.use_mask) {
      // Masked MSE: mean over brain voxels.
      double denom = 0.0, s = 0.0;
      for (std::size_t i = 0; i < vox; ++i) denom += t.acq.mask.data()[i] ? 1.0 : 0.0;
      if (denom > 0.0) {
        for (std::size_t i = 0; i < vox; ++i) {
          if (!t.acq.mask.data()[i]) {
            if (g) dp[i] = dn[i] = 0.0;
            continue;
          }
          const double rp = p[i] - t.label_pos[i], rn = n[i] - t.label_neg[i];
          s += rp * rp + rn * rn;
          if (g) {
            dp[i] = 2.0 * rp / denom;
            dn[i] = 2.0 * rn / denom;
          }
        }
        out.l2 += s / denom;
      } else if (g) {
        std::fill(dp.begin(), dp.end(), 0.0);
        std::fill(dn.begin(), dn.end(), 0.0);
      }
    } else {
      out.l2 += l2_loss(p, n, t.label_pos.data(), t.label_neg.data(), dp, dn);
    }
    if (g) accumulate(w.beta, dp, dn);

    out.model += model_loss(p, n, t.acq, kernel, opts.model_norm, opts.use_mask, dp, dn);
    if (g) accumulate(w.gamma, dp, dn);

    const Dims d{os.nx, os.ny, os.nz};
    out.gradient += gradient_loss(d, p, t.label_pos.data(), opts.gradient_norm, mask, dp);
    out.gradient += gradient_loss(d, n, t.label_neg.data(), opts.gradient_norm, mask, dn);
    if (g) {
      accumulate(w.delta, dp, dn);
      T* gp = grads->chi_pos.sample(b);
      T* gn = grads->chi_neg.sample(b);
      for (std::size_t i = 0; i < vox; ++i) {
        gp[i] = static_cast<T>(acc_p[i] / batch);
        gn[i] = static_cast<T>(acc_n[i] / batch);
      }
    }
  }
  out.l2 /= batch;
  out.model /= batch;
  out.gradient /= batch;
  out.total = w.alpha * out.contrast + w.beta * out.l2 + w.gamma * out.model + w.delta * out.gradient;
  return out;
}

template double batch_cosine<float>(const Tensor<float>&, const Tensor<float>&, Tensor<float>*, Tensor<float>*, bool*);
template double batch_cosine<double>(const Tensor<double>&, const Tensor<double>&, Tensor<double>*, Tensor<double>*,
                                     bool*);
template double contrastive_loss<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                        const Tensor<float>&, ArtifactGrads<float>*);
template double contrastive_loss<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                         const Tensor<double>&, ArtifactGrads<double>*);
template LossBreakdown composite_loss<float>(const ForwardArtifacts<float>&, std::span<const PhysicalTarget* const>,
                                             const DipoleKernel&, const LossOptions&, ArtifactGrads<float>*);
template LossBreakdown composite_loss<double>(const ForwardArtifacts<double>&, std::span<const PhysicalTarget* const>,
                                              const DipoleKernel&, const LossOptions&, ArtifactGrads<double>*);

}  // namespace chisep

#include "chisep/baseline.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/fft.hpp"

namespace chisep {

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("solver max_iters must be >= 1");
  for (double w : {w_field, w_r2p, lambda}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("solver weights must be finite and >= 0");
  }
  if (!(tolerance >= 0.0)) throw InvalidArgument("solver tolerance must be >= 0");
  if (power_iters < 1) throw InvalidArgument("solver power_iters must be >= 1");
  if (!(min_step_ratio > 0.0 && min_step_ratio < 1.0)) throw InvalidArgument("solver min_step_ratio must lie in (0, 1)");
}

nlohmann::json SolverConfig::to_json() const {
  return {{"max_iters", max_iters}, {"w_field", w_field},         {"w_r2p", w_r2p},
          {"lambda", lambda},       {"tolerance", tolerance},     {"power_iters", power_iters},
          {"min_step_ratio", min_step_ratio}};
}

SolverConfig SolverConfig::from_json(const nlohmann::json& j) {
  SolverConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "max_iters") c.max_iters = value.get<int>();
    else if (key == "w_field") c.w_field = value.get<double>();
    else if (key == "w_r2p") c.w_r2p = value.get<double>();
    else if (key == "lambda") c.lambda = value.get<double>();
    else if (key == "tolerance") c.tolerance = value.get<double>();
    else if (key == "power_iters") c.power_iters = value.get<int>();
    else if (key == "min_step_ratio") c.min_step_ratio = value.get<double>();
    else throw InvalidArgument("unknown solver key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::json SolverResult::trace_json() const {
  return {{"objective", trace},
          {"r2p_residual", r2p_residual},
          {"field_residual", field_residual},
          {"iterations", iterations},
          {"converged", converged}};
}

namespace {

struct Problem {
  const AcquisitionSet& acq;
  const SolverConfig& cfg;
  std::vector<double> dk;  // dipole kernel
  std::vector<double> m;   // mask as 0/1
  Dims dims;

  std::vector<double> dipole(const std::vector<double>& x) const { return apply_spectral_kernel(dims, x, dk); }

  struct Eval {
    double f = 0.0;
    double r2p_norm = 0.0;
    double field_norm = 0.0;
    std::vector<double> r_r2p;    // masked residuals
    std::vector<double> r_field;
  };

  Eval evaluate(const std::vector<double>& p, const std::vector<double>& n) const {
    const std::size_t N = p.size();
    std::vector<double> s(N);
    for (std::size_t i = 0; i < N; ++i) s[i] = p[i] + n[i];
    const std::vector<double> field = dipole(s);
    Eval e;
    e.r_r2p.resize(N);
    e.r_field.resize(N);
    double rr = 0.0, rf = 0.0, reg = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      e.r_r2p[i] = m[i] * (acq.a_map[i] * (p[i] - n[i]) - acq.r2_prime[i]);
      e.r_field[i] = m[i] * (field[i] - acq.local_field[i]);
      rr += e.r_r2p[i] * e.r_r2p[i];
      rf += e.r_field[i] * e.r_field[i];
      reg += p[i] * p[i] + n[i] * n[i];
    }
    e.r2p_norm = std::sqrt(rr);
    e.field_norm = std::sqrt(rf);
    e.f = cfg.w_r2p * rr + cfg.w_field * rf + cfg.lambda * reg;
    return e;
  }

  void gradient(const std::vector<double>& p, const std::vector<double>& n, const Eval& e, std::vector<double>& gp,
                std::vector<double>& gn) const {
    const std::size_t N = p.size();
    const std::vector<double> back = dipole(e.r_field);  // D is self-adjoint
    gp.resize(N);
    gn.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double a = 2.0 * cfg.w_r2p * acq.a_map[i] * e.r_r2p[i];
      const double f = 2.0 * cfg.w_field * back[i];
      gp[i] = m[i] * (a + f + 2.0 * cfg.lambda * p[i]);
      gn[i] = m[i] * (-a + f + 2.0 * cfg.lambda * n[i]);
    }
  }

  // Largest eigenvalue of the Hessian of the smooth objective, by power
  // iteration on H v = 2 (K^T W K + lambda) v restricted to the mask.
  double lipschitz() const {
    const std::size_t N = m.size();
    std::vector<double> vp(N), vn(N);
    for (std::size_t i = 0; i < N; ++i) {
      vp[i] = m[i] * (1.0 + 0.5 * std::sin(0.37 * static_cast<double>(i)));
      vn[i] = m[i] * (1.0 + 0.5 * std::cos(0.23 * static_cast<double>(i)));
    }
    double est = 0.0;
    for (int it = 0; it < cfg.power_iters; ++it) {
      double norm = 0.0;
      for (std::size_t i = 0; i < N; ++i) norm += vp[i] * vp[i] + vn[i] * vn[i];
      norm = std::sqrt(norm);
      if (norm == 0.0) return 2.0 * cfg.lambda;
      for (std::size_t i = 0; i < N; ++i) {
        vp[i] /= norm;
        vn[i] /= norm;
      }
      std::vector<double> s(N), d(N);
      for (std::size_t i = 0; i < N; ++i) s[i] = vp[i] + vn[i];
      std::vector<double> fs = dipole(s);
      for (std::size_t i = 0; i < N; ++i) fs[i] *= m[i];
      const std::vector<double> back = dipole(fs);
      std::vector<double> hp(N), hn(N);
      double dot = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double a = acq.a_map[i];
        const double r = m[i] * a * a * (vp[i] - vn[i]);
        hp[i] = m[i] * 2.0 * (cfg.w_r2p * r + cfg.w_field * back[i] + cfg.lambda * vp[i]);
        hn[i] = m[i] * 2.0 * (-cfg.w_r2p * r + cfg.w_field * back[i] + cfg.lambda * vn[i]);
        dot += hp[i] * vp[i] + hn[i] * vn[i];
      }
      est = dot;
      vp.swap(hp);
      vn.swap(hn);
    }
    return std::max(est, 2.0 * cfg.lambda);
  }
};

void project(std::vector<double>& p, std::vector<double>& n, const std::vector<double>& m) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = m[i] * std::max(p[i], 0.0);
    n[i] = m[i] * std::min(n[i], 0.0);
  }
}

}  // namespace

SolverResult separate_iterative(const AcquisitionSet& acq, const SolverConfig& cfg) {
  cfg.validate();
  acq.validate();
  const Dims dims = acq.dims();
  const std::size_t N = dims.count();
  Problem prob{acq, cfg, dipole_kernel(dims, acq.qsm.voxel_size()).values, std::vector<double>(N), dims};
  for (std::size_t i = 0; i < N; ++i) prob.m[i] = acq.mask[i] ? 1.0 : 0.0;

  std::vector<double> p(N), n(N);
  for (std::size_t i = 0; i < N; ++i) {
    p[i] = acq.qsm[i];
    n[i] = acq.qsm[i];
  }
  project(p, n, prob.m);

  SolverResult res;
  Problem::Eval cur = prob.evaluate(p, n);
  res.trace.push_back(cur.f);
  res.r2p_residual.push_back(cur.r2p_norm);
  res.field_residual.push_back(cur.field_norm);

  const double t0 = 1.0 / prob.lipschitz();
  double t = t0;
  std::vector<double> gp, gn, np(N), nn(N);
  for (int it = 0; it < cfg.max_iters; ++it) {
    prob.gradient(p, n, cur, gp, gn);
    Problem::Eval next;
    for (;;) {
      for (std::size_t i = 0; i < N; ++i) {
        np[i] = p[i] - t * gp[i];
        nn[i] = n[i] - t * gn[i];
      }
      project(np, nn, prob.m);
      // Sufficient decrease for projected gradient steps:
      // f(x+) <= f(x) + <g, x+ - x> + ||x+ - x||^2 / (2t).
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double dp = np[i] - p[i], dn = nn[i] - n[i];
        lin += gp[i] * dp + gn[i] * dn;
        sq += dp * dp + dn * dn;
      }
      next = prob.evaluate(np, nn);
      if (sq == 0.0 || next.f <= cur.f + lin + sq / (2.0 * t)) break;
      t *= 0.5;
      if (t < t0 * cfg.min_step_ratio) {
        throw SolverError("baseline solver: no decrease at iteration " + std::to_string(it) +
                              " after backtracking to the step floor",
                          res.trace);
      }
    }
    if (!std::isfinite(next.f) || next.f > cur.f) {
      throw SolverError("baseline solver: objective increased at iteration " + std::to_string(it), res.trace);
    }
    const double decrease = cur.f - next.f;
    p.swap(np);
    n.swap(nn);
    cur = std::move(next);
    res.trace.push_back(cur.f);
    res.r2p_residual.push_back(cur.r2p_norm);
    res.field_residual.push_back(cur.field_norm);
    res.iterations = it + 1;
    if (decrease <= cfg.tolerance * std::max(res.trace[res.trace.size() - 2], 1e-300)) {
      res.converged = true;
      break;
    }
    // Let the step grow back slowly after backtracking.
    t = std::min(t0, 2.0 * t);
  }
  const VoxelSize vs = acq.qsm.voxel_size();
  res.sources = SourcePair{Volume3D(dims, vs, std::move(p), "ppm"), Volume3D(dims, vs, std::move(n), "ppm")};
  return res;
}

}  // namespace chisep

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <iostream>
#include <sstream>
#include <thread>

#include "chisep/bundle.hpp"
#include "chisep/errors.hpp"
#include "chisep/metrics.hpp"
#include "chisep/svol_io.hpp"
#include "chisep/synth.hpp"
#include "chisep/training.hpp"
#include "commands.hpp"
#include "output.hpp"
#include "predict.hpp"

namespace chisep::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kBranch[2] = {"pos", "neg"};

// Runs f(0..n-1) on up to `jobs` threads. Results must be written by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

const Volume3D& branch(const SourcePair& s, int b) { return b == 0 ? s.chi_pos : s.chi_neg; }

// NaN when the metric is undefined (e.g. zero reference inside the mask).
template <typename F>
double guarded(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return std::nan("");
  } catch (const InvalidArgument&) {
    return std::nan("");
  }
}

struct BranchMetrics {
  double nrmse = 0.0, hfen = 0.0, xsim = 0.0;
};

BranchMetrics branch_metrics(const Volume3D& est, const Volume3D& ref, const MaskVolume& mask, const EvalConfig& e) {
  return {guarded([&] { return nrmse(est, ref, mask); }), guarded([&] { return hfen(est, ref, mask, e.hfen); }),
          guarded([&] { return xsim(est, ref, mask, e.xsim); })};
}

struct Method {
  std::string label;
  fs::path dir;
  SourcePair src;
  BranchMetrics m[2];
};

Method parse_method(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw InvalidArgument("--method expects LABEL=DIR, got '" + spec + "'");
  }
  Method m;
  m.label = spec.substr(0, eq);
  m.dir = spec.substr(eq + 1);
  return m;
}

struct Profile {
  std::array<double, 3> p0{}, p1{};
  int n = 0;
};

Profile parse_profile(const std::string& spec, const Dims& dims) {
  auto fail = [&] { return InvalidArgument("--profile expects x0,y0,z0:x1,y1,z1[:n], got '" + spec + "'"); };
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 2 && parts.size() != 3) throw fail();
  auto point = [&](const std::string& s) {
    std::array<double, 3> p{};
    std::stringstream ps(s);
    std::string tok;
    for (int a = 0; a < 3; ++a) {
      if (!std::getline(ps, tok, ',')) throw fail();
      try {
        p[a] = std::stod(tok);
      } catch (const std::exception&) {
        throw fail();
      }
      if (!(p[a] >= 0.0 && p[a] <= dims[a] - 1)) throw InvalidArgument("--profile point outside the grid: " + spec);
    }
    if (std::getline(ps, tok, ',')) throw fail();
    return p;
  };
  Profile pr;
  pr.p0 = point(parts[0]);
  pr.p1 = point(parts[1]);
  if (parts.size() == 3) {
    try {
      pr.n = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw fail();
    }
    if (pr.n < 2) throw InvalidArgument("--profile needs n >= 2");
  } else {
    double len2 = 0.0;
    for (int a = 0; a < 3; ++a) len2 += (pr.p1[a] - pr.p0[a]) * (pr.p1[a] - pr.p0[a]);
    pr.n = std::max(2, static_cast<int>(std::floor(std::sqrt(len2))) + 1);
  }
  return pr;
}

// ROI means per [row][col][branch].
using RoiTable = std::array<std::array<std::array<RoiStats, 2>, 3>, 3>;

RoiTable roi_table(const SourcePair& s, const std::array<std::array<MaskVolume, 3>, 3>& rois) {
  RoiTable t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < 2; ++b) t[r][c][b] = roi_stats(branch(s, b), rois[r][c]);
  return t;
}

std::string regression_rows(const std::string& label, const RoiTable& t, const std::array<double, 3>& dia,
                            const std::array<double, 3>& para) {
  std::string out;
  auto row = [&](const char* series, const std::vector<double>& xs, const std::vector<double>& ys) {
    const RegressionResult r = linear_regression(xs, ys);
    out += label + "," + series + "," + num(r.slope) + "," + num(r.intercept) + "," + num(r.r_squared) + "," +
           std::to_string(xs.size()) + "\n";
  };
  auto means = [&](int r, int b) {
    return std::vector<double>{t[r][0][b].mean, t[r][1][b].mean, t[r][2][b].mean};
  };
  const std::vector<double> xd(dia.begin(), dia.end()), xp(para.begin(), para.end());
  // Branch index 0 = pos, 1 = neg; row 0 diamagnetic, row 1 paramagnetic, row 2 mixed.
  row("row0_dia_neg_vs_conc", xd, means(0, 1));
  row("row1_para_pos_vs_conc", xp, means(1, 0));
  row("row2_mixed_neg_vs_dia_conc", xd, means(2, 1));
  row("row2_mixed_pos_vs_para_conc", xp, means(2, 0));
  const auto s_neg = means(0, 1), m_neg = means(2, 1), s_pos = means(1, 0), m_pos = means(2, 0);
  row("single_vs_mixed_neg", s_neg, m_neg);
  row("single_vs_mixed_pos", s_pos, m_pos);
  std::vector<double> sx = s_pos, my = m_pos;
  sx.insert(sx.end(), s_neg.begin(), s_neg.end());
  my.insert(my.end(), m_neg.begin(), m_neg.end());
  row("single_vs_mixed_pooled", sx, my);
  return out;
}

MaskVolume full_mask(const Volume3D& v) { return MaskVolume(v.dims(), v.voxel_size(), true); }

int compare(const EvalOptions& o, const RunConfig& cfg, const std::string& raw) {
  if (o.reference.empty()) throw InvalidArgument("eval needs --reference (or --ablation)");
  if (o.methods.empty()) throw InvalidArgument("eval needs at least one --method LABEL=DIR");
  std::vector<Method> methods;
  for (const auto& spec : o.methods) methods.push_back(parse_method(spec));
  const fs::path ref_dir = o.reference;
  const SourcePair ref = read_sources(ref_dir);
  const MaskVolume mask = cfg.eval.brain_mask && fs::exists(ref_dir / "mask.svol") ? read_svol_mask(ref_dir / "mask.svol")
                                                                                     : full_mask(ref.chi_pos);
  require_same_grid(ref.chi_pos, mask, "eval mask");

  for (auto& m : methods) {
    m.src = read_sources(m.dir);
    require_same_grid(ref.chi_pos, m.src.chi_pos, ("eval method " + m.label).c_str());
  }
  std::vector<Profile> profiles;
  for (const auto& p : o.profiles) profiles.push_back(parse_profile(p, ref.dims()));

  const fs::path out = o.out;
  prepare_out_dir(out, false);
  echo_config(out, cfg, raw);

  parallel_for(methods.size(), cfg.jobs, [&](std::size_t i) {
    for (int b = 0; b < 2; ++b) methods[i].m[b] = branch_metrics(branch(methods[i].src, b), branch(ref, b), mask, cfg.eval);
  });

  std::string csv = "method,branch,nrmse,hfen,xsim\n";
  nlohmann::json report = {{"reference", o.reference},
                           {"mask_scope", cfg.eval.brain_mask ? "brain" : "full"},
                           {"methods", nlohmann::json::array()}};
  for (const auto& m : methods) {
    nlohmann::json jm = {{"label", m.label}, {"dir", m.dir.string()}};
    for (int b = 0; b < 2; ++b) {
      csv += m.label + "," + kBranch[b] + "," + num(m.m[b].nrmse) + "," + num(m.m[b].hfen) + "," + num(m.m[b].xsim) + "\n";
      auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
      jm[kBranch[b]] = {{"nrmse", finite_or_null(m.m[b].nrmse)},
                        {"hfen", finite_or_null(m.m[b].hfen)},
                        {"xsim", finite_or_null(m.m[b].xsim)}};
    }
    report["methods"].push_back(jm);
  }
  write_text(out / "metrics.csv", csv);
  write_json(out / "metrics.json", report);

  const fs::path roi_dir = ref_dir / "rois";
  if (fs::is_directory(roi_dir)) {
    std::array<std::array<MaskVolume, 3>, 3> rois;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "roi_r%d_c%d.svol", r, c);
        rois[r][c] = read_svol_mask(roi_dir / name);
      }
    std::vector<std::pair<std::string, const SourcePair*>> rows{{"reference", &ref}};
    for (const auto& m : methods) rows.emplace_back(m.label, &m.src);
    std::vector<RoiTable> tables(rows.size());
    parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) { tables[i] = roi_table(*rows[i].second, rois); });

    std::string roi_csv = "method,row,col,branch,mean,std,n\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          for (int b = 0; b < 2; ++b) {
            const RoiStats& s = tables[i][r][c][b];
            roi_csv += rows[i].first + "," + std::to_string(r) + "," + std::to_string(c) + "," + kBranch[b] + "," +
                       num(s.mean) + "," + num(s.std) + "," + std::to_string(s.n) + "\n";
          }
    write_text(out / "roi_stats.csv", roi_csv);

    if (o.regression == "single-vs-mixed") {
      const fs::path info_path = ref_dir / "phantom.json";
      std::ifstream in(info_path);
      if (!in) throw IoError("regression needs the phantom description", info_path.string());
      const nlohmann::json info = nlohmann::json::parse(in);
      const auto dia = info.at("dia_concentration").get<std::array<double, 3>>();
      const auto para = info.at("para_concentration").get<std::array<double, 3>>();
      std::string reg = "method,series,slope,intercept,r_squared,points\n";
      for (std::size_t i = 0; i < rows.size(); ++i) reg += regression_rows(rows[i].first, tables[i], dia, para);
      write_text(out / "regression.csv", reg);
    }
  } else if (!o.regression.empty()) {
    throw IoError("regression needs ROI masks", roi_dir.string());
  }

  if (!profiles.empty()) {
    std::string pcsv = "method,profile,branch,index,distance_mm,value\n";
    std::vector<std::pair<std::string, const SourcePair*>> rows{{"reference", &ref}};
    for (const auto& m : methods) rows.emplace_back(m.label, &m.src);
    for (const auto& [label, src] : rows)
      for (std::size_t p = 0; p < profiles.size(); ++p)
        for (int b = 0; b < 2; ++b) {
          const auto samples = line_profile(branch(*src, b), profiles[p].p0, profiles[p].p1, profiles[p].n);
          for (std::size_t k = 0; k < samples.size(); ++k) {
            pcsv += label + "," + std::to_string(p) + "," + kBranch[b] + "," + std::to_string(k) + "," +
                    num(samples[k].distance_mm) + "," + num(samples[k].value) + "\n";
          }
        }
    write_text(out / "profiles.csv", pcsv);
  }

  std::cout << "metrics: " << (out / "metrics.csv").string() << "\n";
  return kExitOk;
}

// Per-branch accumulators for the ablation table.
struct Accum {
  double err2 = 0.0, ref2 = 0.0;
  double nrmse = 0.0, hfen = 0.0, xsim = 0.0;
  int n = 0;
};

int ablation(const EvalOptions& o, const RunConfig& cfg, const std::string& raw) {
  if (o.with_cl.empty() && o.without_cl.empty()) {
    throw InvalidArgument("--ablation needs --with-cl and/or --without-cl");
  }
  if (o.test_data.empty()) throw InvalidArgument("--ablation needs --test-data");
  const DatasetManifest manifest = read_manifest(fs::path(o.test_data) / "manifest.json");
  std::vector<std::size_t> indices;
  if (!o.history.empty()) {
    std::ifstream in(o.history);
    if (!in) throw IoError("cannot read history", o.history);
    indices = TrainHistory::from_json(nlohmann::json::parse(in)).val_indices;
    for (auto i : indices) {
      if (i >= manifest.samples.size()) throw InvalidArgument("history index outside the test set");
    }
  } else {
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) indices.push_back(i);
  }

  struct Model {
    std::string label;
    std::string path;
    std::optional<Checkpoint> ckpt;
    std::string alpha;
    Accum acc[2];
  };
  std::vector<Model> models;
  for (const auto& [label, path] : {std::pair{"with_cl", o.with_cl}, std::pair{"without_cl", o.without_cl}}) {
    if (path.empty()) continue;
    Model m{label, path, read_checkpoint(path), "", {}};
    if (m.ckpt->meta.contains("train")) {
      m.alpha = num(TrainConfig::from_json(m.ckpt->meta["train"]).effective_weights().alpha);
    }
    models.push_back(std::move(m));
  }
  models.push_back(Model{"trivial", "", std::nullopt, "", {}});

  const fs::path out = o.out;
  prepare_out_dir(out, false);
  echo_config(out, cfg, raw);

  parallel_for(models.size(), cfg.jobs, [&](std::size_t mi) {
    Model& model = models[mi];
    for (std::size_t idx : indices) {
      const TrainingSample s = load_sample(manifest, idx);
      const AcquisitionSet acq = sample_acquisition(s, manifest.norm);
      SourcePair est;
      if (model.ckpt) {
        InferenceOptions io;
        io.window = s.mask.dims();
        io.stride = {io.window.nx, io.window.ny, io.window.nz};
        est = predict(*model.ckpt, acq, io);
      } else {
        est = SourcePair::zeros(acq.dims(), acq.qsm.voxel_size());
        for (std::size_t i = 0; i < acq.qsm.size(); ++i) {
          if (!acq.mask[i]) continue;
          est.chi_pos[i] = std::max(acq.qsm[i], 0.0);
          est.chi_neg[i] = std::min(acq.qsm[i], 0.0);
        }
      }
      const MaskVolume mask = cfg.eval.brain_mask ? s.mask : full_mask(s.label_pos);
      for (int b = 0; b < 2; ++b) {
        const Volume3D& e = branch(est, b);
        const Volume3D& r = b == 0 ? s.label_pos : s.label_neg;
        Accum& a = model.acc[b];
        double r2 = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) {
          if (!mask[i]) continue;
          a.err2 += (e[i] - r[i]) * (e[i] - r[i]);
          r2 += r[i] * r[i];
        }
        a.ref2 += r2;
        if (r2 == 0.0) continue;  // per-sample metrics undefined
        const BranchMetrics bm = branch_metrics(e, r, mask, cfg.eval);
        if (!std::isfinite(bm.nrmse) || !std::isfinite(bm.hfen) || !std::isfinite(bm.xsim)) continue;
        a.nrmse += bm.nrmse;
        a.hfen += bm.hfen;
        a.xsim += bm.xsim;
        ++a.n;
      }
    }
  });

  std::string csv = "method,alpha,branch,nrmse_pooled,nrmse_mean,hfen_mean,xsim_mean,samples\n";
  for (const auto& m : models)
    for (int b = 0; b < 2; ++b) {
      const Accum& a = m.acc[b];
      const double pooled = a.ref2 > 0.0 ? 100.0 * std::sqrt(a.err2 / a.ref2) : std::nan("");
      const double n = a.n > 0 ? a.n : std::nan("");
      csv += m.label + "," + m.alpha + "," + kBranch[b] + "," + num(pooled) + "," + num(a.nrmse / n) + "," +
             num(a.hfen / n) + "," + num(a.xsim / n) + "," + std::to_string(a.n) + "\n";
    }
  write_text(out / "ablation.csv", csv);
  std::cout << "ablation: " << (out / "ablation.csv").string() << " (" << indices.size() << " samples)\n";
  return kExitOk;
}

}  // namespace

int cmd_eval(const EvalOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  if (o.mask_scope) cfg.eval.brain_mask = *o.mask_scope == "brain";
  cfg.validate();
  return o.ablation ? ablation(o, cfg, raw) : compare(o, cfg, raw);
}

}  // namespace chisep::cli

#include <iostream>

#include "chisep/baseline.hpp"
#include "chisep/bundle.hpp"
#include "chisep/errors.hpp"
#include "commands.hpp"
#include "output.hpp"

namespace chisep::cli {

int cmd_baseline(const BaselineOptions& o) {
  std::string raw;
  RunConfig cfg = o.common.load(&raw);
  if (o.max_iters) cfg.solver.max_iters = *o.max_iters;
  if (o.lambda) cfg.solver.lambda = *o.lambda;
  if (o.w_field) cfg.solver.w_field = *o.w_field;
  if (o.w_r2p) cfg.solver.w_r2p = *o.w_r2p;
  if (o.tolerance) cfg.solver.tolerance = *o.tolerance;
  cfg.validate();

  const AcquisitionSet acq = read_acquisition(o.input);
  const std::filesystem::path out = o.out;
  prepare_out_dir(out, false);
  echo_config(out, cfg, raw);
  try {
    const SolverResult r = separate_iterative(acq, cfg.solver);
    write_sources(r.sources, out);
    write_json(out / "trace.json", r.trace_json());
    std::cout << "sources: " << out.string() << "\n"
              << "iterations: " << r.iterations << (r.converged ? " (converged)" : "") << "\n";
  } catch (const SolverError& e) {
    write_json(out / "trace.json", {{"objective", e.trace()}, {"error", e.what()}});
    throw;
  }
  return kExitOk;
}

}  // namespace chisep::cli

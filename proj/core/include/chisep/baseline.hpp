#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chisep/physics.hpp"

namespace chisep {

struct SolverConfig {
  int max_iters = 300;
  double w_field = 1.0;
  double w_r2p = 1.0;
  double lambda = 1e-3;
  double tolerance = 1e-7;  // stop when the relative objective decrease falls below this
  int power_iters = 20;     // operator-norm estimate for the initial step
  double min_step_ratio = 1e-12;  // backtracking floor relative to the initial step

  void validate() const;
  nlohmann::json to_json() const;
  static SolverConfig from_json(const nlohmann::json& j);
};

struct SolverResult {
  SourcePair sources;
  std::vector<double> trace;  // objective at the start and after every iteration
  std::vector<double> r2p_residual;    // ||M (A(p - n) - R2')|| per entry of trace
  std::vector<double> field_residual;  // ||M (D (x) (p + n) - field)|| per entry of trace
  int iterations = 0;
  bool converged = false;

  nlohmann::json trace_json() const;
};

/// Projected gradient descent with backtracking on
///   w_r2p ||M(A(p - n) - R2')||^2 + w_field ||M(D (x) (p + n) - field)||^2 + lambda (||p||^2 + ||n||^2)
/// over p >= 0, n <= 0, supported on the mask. Starts from
/// p = max(qsm, 0), n = min(qsm, 0). Throws SolverError when backtracking
/// cannot find a decrease.
SolverResult separate_iterative(const AcquisitionSet& acq, const SolverConfig& cfg = {});

}  // namespace chisep

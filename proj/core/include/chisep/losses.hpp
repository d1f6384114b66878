#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "chisep/network.hpp"
#include "chisep/physics.hpp"

namespace chisep {

struct LossWeights {
  double alpha = 1.0;  // contrastive
  double beta = 1.0;   // l2
  double gamma = 0.5;  // model consistency
  double delta = 0.1;  // gradient

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

struct LossBreakdown {
  double contrast = 0.0;
  double l2 = 0.0;
  double model = 0.0;
  double gradient = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator/=(double s);
  bool all_finite() const noexcept;
  nlohmann::json to_json() const;
  static LossBreakdown from_json(const nlohmann::json& j);
};

enum class Norm { kL1, kL2 };
Norm parse_norm(const std::string& s);
const char* to_string(Norm n);

struct LossOptions {
  LossWeights weights{};
  Norm model_norm = Norm::kL1;
  Norm gradient_norm = Norm::kL1;
  bool use_mask = false;  // restrict voxel means to the patch brain mask
};

/// Labels and physical acquisition for one patch.
struct PhysicalTarget {
  Volume3D label_pos;
  Volume3D label_neg;
  AcquisitionSet acq;
};

// Gradient outputs are optional (nullptr) and are overwritten, not added.

/// Cosine of two flattened vectors; 0 with `*degenerate = true` when
/// either has zero norm (gradients are then zero too).
double cosine_similarity(std::span<const double> x, std::span<const double> y, std::span<double> dx = {},
                         std::span<double> dy = {}, bool* degenerate = nullptr);

/// Batch mean of per-sample cosines over full (channels x spatial)
/// flattening.
template <typename T>
double batch_cosine(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* dx, Tensor<T>* dy, bool* degenerate = nullptr);

/// -ln softmax of same-branch similarity, summed over both branches:
///   softplus(s(Gp,Fn) - s(Gp,Fp)) + softplus(s(Gn,Fp) - s(Gn,Fn)).
template <typename T>
double contrastive_loss(const Tensor<T>& guide_pos, const Tensor<T>& guide_neg, const Tensor<T>& f_pos,
                        const Tensor<T>& f_neg, ArtifactGrads<T>* grads = nullptr);

// Closed form on the four similarities (for tests and diagnostics).
double contrastive_from_similarities(double s_pp, double s_pn, double s_np, double s_nn);

/// Mean over voxels of (p - gp)^2 plus the same for the negative branch.
double l2_loss(std::span<const double> p, std::span<const double> n, std::span<const double> gp,
               std::span<const double> gn, std::span<double> dp = {}, std::span<double> dn = {});

/// mean rho(p + n - qsm) + mean rho(D (x) (p + n) - field) + mean rho(A (p - n) - r2'),
/// rho = |.| (L1) or (.)^2 (L2); optional brain mask restricts the means.
double model_loss(std::span<const double> p, std::span<const double> n, const AcquisitionSet& acq,
                  const DipoleKernel& kernel, Norm norm, bool use_mask, std::span<double> dp = {},
                  std::span<double> dn = {});

/// Sum over axes of mean rho(|forward diff of u| - |forward diff of g|) for
/// one branch; difference arrays are one voxel shorter along their axis.
double gradient_loss(const Dims& dims, std::span<const double> u, std::span<const double> g, Norm norm,
                     const MaskVolume* mask = nullptr, std::span<double> du = {});

/// Full weighted objective over a batch. Per-sample terms are averaged over
/// the batch; cosine similarities are batch means. Fills `grads` with
/// d(total)/d(artifacts) when non-null.
template <typename T>
LossBreakdown composite_loss(const ForwardArtifacts<T>& art, std::span<const PhysicalTarget* const> targets,
                             const DipoleKernel& kernel, const LossOptions& opts, ArtifactGrads<T>* grads = nullptr);

}  // namespace chisep
